#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "exposure/calibration.hpp"
#include "exposure/core.hpp"

namespace exposure {

struct FocalParams {
  double k_param = 10.0;
  int gamma = 0;

  friend bool operator==(const FocalParams&, const FocalParams&) = default;
};

enum class BaselineVariant { Base, BaseEta, BaseEtaFocal };

std::string_view to_string(BaselineVariant variant);

struct BaselineConfig {
  BaselineVariant variant = BaselineVariant::BaseEta;
  std::optional<double> global_eta;   // Base only
  std::optional<FocalParams> focal;   // BaseEtaFocal only

  // Throws ValidationError when variant-specific fields are missing or extra.
  void validate() const;
};

/// Averaged object-impact rating of a profile over the photos that hold at
/// least one activated detection. Returns nullopt when no photo qualifies.
/// For Base the thresholds and selection are ignored and every rated object
/// is active at the global threshold.
std::optional<double> rate_profile_baseline(const ProfileDetections& profile,
                                            const SituationModel& model,
                                            const ThresholdTable& thresholds,
                                            const DetectorSelection& selection,
                                            const BaselineConfig& config);

// Sum of r(O) * confidence over the activated detections of one photo.
double photo_contribution(const PhotoDetections& photo, const SituationModel& model,
                          const ThresholdTable& thresholds, const DetectorSelection& selection);

/// Per-object terms of the averaged rating (their sum is the rating).
/// nullopt when no photo holds an activated detection.
std::optional<std::map<std::string, double>> object_contributions(
    const ProfileDetections& profile, const SituationModel& model,
    const ThresholdTable& thresholds, const DetectorSelection& selection);

/// Single threshold shared by every detector, chosen on the 0.01 grid by
/// correlation with manual ratings; the smallest eta wins ties.
double optimize_global_eta(const RatedProfileDataset& dataset, const SituationModel& model,
                           const CalibrationOptions& options = {});

}  // namespace exposure
