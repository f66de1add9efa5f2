#include "exposure/calibration.hpp"

#include <algorithm>
#include <vector>

#include "exposure/errors.hpp"
#include "exposure/parallel.hpp"
#include "exposure/stats.hpp"
#include "indexed.hpp"

namespace exposure {

namespace {

// Confidences of one object in each photo of each sampled profile.
using PhotoConfidences = std::vector<std::vector<double>>;

std::optional<double> rating_from_photos(const PhotoConfidences& photos, double rating,
                                         double eta) {
  std::vector<double> contributions;
  for (const auto& confs : photos) {
    double c = 0.0;
    bool any = false;
    for (double conf : confs) {
      if (conf >= eta) {
        c += rating * conf;
        any = true;
      }
    }
    if (any) contributions.push_back(c);
  }
  if (contributions.empty()) return std::nullopt;
  const double n = static_cast<double>(contributions.size());
  return detail::ordered_sum(contributions) / n;
}

PhotoConfidences photos_of(const ProfileDetections& profile, const std::string& object_id) {
  PhotoConfidences out;
  for (const auto& photo : profile.photos) {
    std::vector<double> confs;
    for (const auto& d : photo.detections) {
      if (d.object_id == object_id) confs.push_back(d.confidence);
    }
    if (!confs.empty()) {
      std::sort(confs.begin(), confs.end());
      out.push_back(std::move(confs));
    }
  }
  return out;
}

std::optional<double> correlation(const std::vector<double>& automatic,
                                  const std::vector<double>& manual, bool ranks) {
  if (ranks) {
    const auto ra = rank_transform(automatic);
    const auto rm = rank_transform(manual);
    return try_pearson(ra, rm);
  }
  return try_pearson(automatic, manual);
}

// Exhaustive eta search for one object over per-profile occurrence lists.
ObjectThreshold search_eta(const std::vector<PhotoConfidences>& occurrences, double rating,
                           const std::vector<double>& manual, const CalibrationOptions& options) {
  ObjectThreshold best;
  bool found = false;
  std::vector<double> automatic(manual.size());
  for (int step = 1; step <= kEtaSteps; ++step) {
    const double eta = eta_at(step);
    std::size_t support = 0;
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
      auto r = rating_from_photos(occurrences[i], rating, eta);
      automatic[i] = r.value_or(0.0);
      if (r) ++support;
    }
    if (support < options.min_support) continue;
    auto tau = correlation(automatic, manual, options.rank_transform);
    if (!tau) continue;
    if (!found || *tau > best.tau + detail::kTieTolerance) {
      best = {eta, *tau, support, false};
      found = true;
    }
  }
  if (!found) return ObjectThreshold{};
  return best;
}

}  // namespace

double ThresholdTable::eta_for(const std::string& object_id) const {
  auto it = objects.find(object_id);
  return it == objects.end() ? default_eta : it->second.eta;
}

ThresholdTable ThresholdTable::uniform(const SituationModel& model, double eta) {
  ThresholdTable table;
  table.situation = model.situation().code;
  table.default_eta = eta;
  for (const auto& [id, r] : model.ratings()) {
    table.objects[id] = ObjectThreshold{eta, 1.0, 0, false};
  }
  table.tau_threshold = -1.0;
  return table;
}

DetectorSelection selection_at(const ThresholdTable& table, double tau_threshold) {
  DetectorSelection selection;
  selection.tau_threshold = tau_threshold;
  for (const auto& [id, t] : table.objects) {
    if (!t.degenerate && t.tau >= tau_threshold) selection.active_objects.insert(id);
  }
  return selection;
}

double filter_detection(const DetectionRecord& detection, double eta) {
  return detection.confidence >= eta ? detection.confidence : 0.0;
}

std::optional<double> single_object_rating(const ProfileDetections& profile,
                                           const std::string& object_id, double rating,
                                           double eta) {
  return rating_from_photos(photos_of(profile, object_id), rating, eta);
}

ObjectThreshold calibrate_object_threshold(const RatedProfileDataset& dataset,
                                           const SituationModel& model,
                                           const std::string& object_id,
                                           const CalibrationOptions& options) {
  const auto sample = rated_sample(dataset, model.situation().code, options.split);
  if (sample.size() == 0) throw DegenerateError("calibration sample is empty");
  std::vector<PhotoConfidences> occurrences;
  occurrences.reserve(sample.size());
  for (const auto* p : sample.profiles) occurrences.push_back(photos_of(*p, object_id));
  return search_eta(occurrences, model.rating_or_zero(object_id), sample.manual, options);
}

ThresholdTable calibrate_thresholds(const RatedProfileDataset& dataset, const SituationModel& model,
                                    const CalibrationOptions& options) {
  const auto sample = rated_sample(dataset, model.situation().code, options.split);
  if (sample.size() == 0) throw DegenerateError("calibration sample is empty");
  const detail::ObjectIndex index(model);

  // occurrences[object][profile][photo] -> confidences
  std::vector<std::vector<PhotoConfidences>> occurrences(
      index.size(), std::vector<PhotoConfidences>(sample.size()));
  for (std::size_t p = 0; p < sample.size(); ++p) {
    const auto indexed = detail::index_profile(*sample.profiles[p], index);
    for (const auto& photo : indexed.photos) {
      int last = -1;
      for (const auto& d : photo.detections) {
        if (d.object < 0) continue;
        auto& per_photo = occurrences[static_cast<std::size_t>(d.object)][p];
        if (d.object != last) per_photo.emplace_back();
        per_photo.back().push_back(d.confidence);
        last = d.object;
      }
    }
  }

  std::vector<ObjectThreshold> results(index.size());
  parallel_for(index.size(), options.jobs, [&](std::size_t o) {
    results[o] = search_eta(occurrences[o], index.ratings()[o], sample.manual, options);
  });

  ThresholdTable table;
  table.situation = model.situation().code;
  for (std::size_t o = 0; o < index.size(); ++o) table.objects[index.ids()[o]] = results[o];
  return table;
}

DetectorSelection select_detectors(const RatedProfileDataset& dataset, const SituationModel& model,
                                   const ThresholdTable& thresholds,
                                   const CalibrationOptions& options) {
  const auto sample = rated_sample(dataset, model.situation().code, options.split);
  if (sample.size() == 0) throw DegenerateError("selection sample is empty");
  const detail::ObjectIndex index(model);
  std::vector<detail::IndexedProfile> profiles;
  profiles.reserve(sample.size());
  for (const auto* p : sample.profiles) profiles.push_back(detail::index_profile(*p, index));
  const auto eta = index.etas(thresholds);
  const auto& rating = index.ratings();

  std::optional<double> best_value;
  double best_tau = -1.0;
  std::vector<char> previous_active;
  std::optional<double> previous_value;

  for (int step = -kTauSteps; step <= kTauSteps; ++step) {
    const double tau = tau_at(step);
    const auto active = index.active(selection_at(thresholds, tau));
    std::optional<double> value;
    if (!previous_active.empty() && active == previous_active) {
      value = previous_value;
    } else {
      std::vector<double> automatic;
      std::vector<double> manual;
      for (std::size_t i = 0; i < profiles.size(); ++i) {
        auto r = detail::profile_rating(profiles[i], rating, eta, active);
        if (!r) continue;
        automatic.push_back(*r);
        manual.push_back(sample.manual[i]);
      }
      if (automatic.size() >= options.min_support) {
        value = correlation(automatic, manual, options.rank_transform);
      }
    }
    previous_active = active;
    previous_value = value;
    if (value && (!best_value || *value > *best_value + detail::kTieTolerance)) {
      best_value = value;
      best_tau = tau;
    }
  }
  if (!best_value) throw DegenerateError("every detector subset is degenerate");
  return selection_at(thresholds, best_tau);
}

ThresholdTable calibrate_and_select(const RatedProfileDataset& dataset, const SituationModel& model,
                                    const CalibrationOptions& options) {
  auto table = calibrate_thresholds(dataset, model, options);
  table.tau_threshold = select_detectors(dataset, model, table, options).tau_threshold;
  return table;
}

}  // namespace exposure
