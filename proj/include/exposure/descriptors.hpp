#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exposure/calibration.hpp"
#include "exposure/core.hpp"

namespace exposure {

/// Positiveness, negativeness and confidence of one photo, computed over its
/// valid detections.
struct ImageDescriptor {
  std::string photo_id;
  double positive = 0.0;    // >= 0
  double negative = 0.0;    // <= 0
  double confidence = 0.0;  // (0, 1]

  std::array<double, 3> values() const { return {positive, negative, confidence}; }
  // Signed photo impact used for feedback.
  double impact() const { return positive + negative; }
};

// nullopt when the photo holds no valid detection.
std::optional<ImageDescriptor> image_descriptor(const PhotoDetections& photo,
                                                const SituationModel& model,
                                                const ThresholdTable& thresholds);

// Descriptors of every eligible photo of the profile, in photo order.
std::vector<ImageDescriptor> profile_descriptors(const ProfileDetections& profile,
                                                 const SituationModel& model,
                                                 const ThresholdTable& thresholds);

inline constexpr int kDefaultClusters = 4;

struct ClusterModel {
  int k = kDefaultClusters;
  std::vector<std::array<double, 3>> centroids;  // lexicographic order
  std::uint64_t seed = 0;

  int assign(const std::array<double, 3>& point) const;
};

ClusterModel fit_clusters(std::span<const ImageDescriptor> descriptors, int k, std::uint64_t seed);

enum class VarianceMode {
  MeanOfAttributes,  // mean of the three per-attribute population variances
  Trace,             // their sum
};

struct UserDescriptor {
  std::string user_id;
  std::vector<double> values;  // k blocks of (mean f_p, mean f_n, mean f_c, variance)
};

/// Per-cluster means and scalar variance of a user's image descriptors.
/// Empty clusters contribute zeros. Throws ValidationError on an empty set.
UserDescriptor user_descriptor(const std::string& user_id,
                               std::span<const ImageDescriptor> descriptors,
                               const ClusterModel& clusters,
                               VarianceMode mode = VarianceMode::MeanOfAttributes);

}  // namespace exposure
