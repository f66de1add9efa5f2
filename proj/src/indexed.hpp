#pragma once

// Integer-indexed views of profiles used by the hot loops of calibration,
// baseline rating and descriptor extraction.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exposure/calibration.hpp"
#include "exposure/core.hpp"

namespace exposure::detail {

inline constexpr double kTieTolerance = 1e-12;

struct IndexedDetection {
  int object = -1;  // -1: not rated in the model
  double confidence = 0.0;
};

struct IndexedPhoto {
  std::vector<IndexedDetection> detections;  // sorted by (object_id, confidence)
};

struct IndexedProfile {
  std::vector<IndexedPhoto> photos;
};

/// Dense ids for the objects of a model, in object_id order.
class ObjectIndex {
 public:
  explicit ObjectIndex(const SituationModel& model) {
    ids_.reserve(model.size());
    ratings_.reserve(model.size());
    for (const auto& [id, r] : model.ratings()) {
      ids_.push_back(id);
      ratings_.push_back(r);
    }
  }

  int find(const std::string& object_id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), object_id);
    if (it == ids_.end() || *it != object_id) return -1;
    return static_cast<int>(it - ids_.begin());
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<double>& ratings() const { return ratings_; }

  std::vector<double> etas(const ThresholdTable& table) const {
    std::vector<double> out;
    out.reserve(ids_.size());
    for (const auto& id : ids_) out.push_back(table.eta_for(id));
    return out;
  }

  std::vector<char> active(const DetectorSelection& selection) const {
    std::vector<char> out;
    out.reserve(ids_.size());
    for (const auto& id : ids_) out.push_back(selection.is_active(id) ? 1 : 0);
    return out;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<double> ratings_;
};

inline IndexedProfile index_profile(const ProfileDetections& profile, const ObjectIndex& index) {
  IndexedProfile out;
  out.photos.reserve(profile.photos.size());
  for (const auto& photo : profile.photos) {
    std::vector<const DetectionRecord*> sorted;
    sorted.reserve(photo.detections.size());
    for (const auto& d : photo.detections) sorted.push_back(&d);
    std::sort(sorted.begin(), sorted.end(), [](const DetectionRecord* a, const DetectionRecord* b) {
      if (a->object_id != b->object_id) return a->object_id < b->object_id;
      return a->confidence < b->confidence;
    });
    IndexedPhoto ip;
    ip.detections.reserve(sorted.size());
    for (const auto* d : sorted) ip.detections.push_back({index.find(d->object_id), d->confidence});
    out.photos.push_back(std::move(ip));
  }
  return out;
}

// Summation in sorted order, independent of the input order.
inline double ordered_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

/// Averaged profile rating over photos holding at least one activated
/// detection. Unrated objects are never activated.
inline std::optional<double> profile_rating(const IndexedProfile& profile,
                                            std::span<const double> rating,
                                            std::span<const double> eta,
                                            std::span<const char> active) {
  std::vector<double> contributions;
  for (const auto& photo : profile.photos) {
    double c = 0.0;
    bool any = false;
    for (const auto& d : photo.detections) {
      if (d.object < 0) continue;
      const auto o = static_cast<std::size_t>(d.object);
      if (!active[o] || d.confidence < eta[o]) continue;
      c += rating[o] * d.confidence;
      any = true;
    }
    if (any) contributions.push_back(c);
  }
  if (contributions.empty()) return std::nullopt;
  const double n = static_cast<double>(contributions.size());
  return ordered_sum(contributions) / n;
}

}  // namespace exposure::detail
