#include "exposure/baseline.hpp"

#include <vector>

#include "exposure/errors.hpp"
#include "exposure/stats.hpp"
#include "indexed.hpp"

namespace exposure {

std::string_view to_string(BaselineVariant variant) {
  switch (variant) {
    case BaselineVariant::Base: return "BASE";
    case BaselineVariant::BaseEta: return "BASE_ETA";
    case BaselineVariant::BaseEtaFocal: return "BASE_ETA_FR";
  }
  return "BASE";
}

void BaselineConfig::validate() const {
  const bool needs_eta = variant == BaselineVariant::Base;
  const bool needs_focal = variant == BaselineVariant::BaseEtaFocal;
  if (needs_eta != global_eta.has_value()) {
    throw ValidationError("global_eta must be set exactly for the BASE variant");
  }
  if (needs_focal != focal.has_value()) {
    throw ValidationError("focal parameters must be set exactly for BASE_ETA_FR");
  }
  if (global_eta && !(*global_eta > 0.0 && *global_eta <= 1.0)) {
    throw ValidationError("global_eta outside (0, 1]");
  }
}

namespace {

struct Activation {
  ThresholdTable thresholds;
  DetectorSelection selection;
};

Activation activation_for(const SituationModel& model, const ThresholdTable& thresholds,
                          const DetectorSelection& selection, const BaselineConfig& config) {
  if (config.variant == BaselineVariant::Base) {
    auto table = ThresholdTable::uniform(model, *config.global_eta);
    auto all = selection_at(table, -1.0);
    return {std::move(table), std::move(all)};
  }
  return {thresholds, selection};
}

}  // namespace

std::optional<double> rate_profile_baseline(const ProfileDetections& profile,
                                            const SituationModel& model,
                                            const ThresholdTable& thresholds,
                                            const DetectorSelection& selection,
                                            const BaselineConfig& config) {
  config.validate();
  const SituationModel effective = config.focal
                                       ? apply_focal(model, config.focal->k_param, config.focal->gamma)
                                       : model;
  const auto act = activation_for(model, thresholds, selection, config);
  const detail::ObjectIndex index(effective);
  const auto indexed = detail::index_profile(profile, index);
  return detail::profile_rating(indexed, index.ratings(), index.etas(act.thresholds),
                                index.active(act.selection));
}

double photo_contribution(const PhotoDetections& photo, const SituationModel& model,
                          const ThresholdTable& thresholds, const DetectorSelection& selection) {
  ProfileDetections single{"", {photo}};
  const detail::ObjectIndex index(model);
  const auto indexed = detail::index_profile(single, index);
  const auto etas = index.etas(thresholds);
  const auto active = index.active(selection);
  double c = 0.0;
  for (const auto& d : indexed.photos.front().detections) {
    if (d.object < 0) continue;
    const auto o = static_cast<std::size_t>(d.object);
    if (active[o] && d.confidence >= etas[o]) c += index.ratings()[o] * d.confidence;
  }
  return c;
}

std::optional<std::map<std::string, double>> object_contributions(
    const ProfileDetections& profile, const SituationModel& model,
    const ThresholdTable& thresholds, const DetectorSelection& selection) {
  const detail::ObjectIndex index(model);
  const auto indexed = detail::index_profile(profile, index);
  const auto etas = index.etas(thresholds);
  const auto active = index.active(selection);
  std::vector<std::vector<double>> terms(index.size());
  std::size_t covered = 0;
  for (const auto& photo : indexed.photos) {
    bool any = false;
    std::vector<double> per_object(index.size(), 0.0);
    std::vector<char> touched(index.size(), 0);
    for (const auto& d : photo.detections) {
      if (d.object < 0) continue;
      const auto o = static_cast<std::size_t>(d.object);
      if (!active[o] || d.confidence < etas[o]) continue;
      per_object[o] += index.ratings()[o] * d.confidence;
      touched[o] = 1;
      any = true;
    }
    if (!any) continue;
    ++covered;
    for (std::size_t o = 0; o < index.size(); ++o) {
      if (touched[o]) terms[o].push_back(per_object[o]);
    }
  }
  if (covered == 0) return std::nullopt;
  std::map<std::string, double> out;
  for (std::size_t o = 0; o < index.size(); ++o) {
    out[index.ids()[o]] = detail::ordered_sum(terms[o]) / static_cast<double>(covered);
  }
  return out;
}

double optimize_global_eta(const RatedProfileDataset& dataset, const SituationModel& model,
                           const CalibrationOptions& options) {
  const auto sample = rated_sample(dataset, model.situation().code, options.split);
  if (sample.size() == 0) throw DegenerateError("calibration sample is empty");
  const detail::ObjectIndex index(model);
  std::vector<detail::IndexedProfile> profiles;
  for (const auto* p : sample.profiles) profiles.push_back(detail::index_profile(*p, index));
  const std::vector<char> active(index.size(), 1);

  std::optional<double> best_value;
  double best_eta = 1.0;
  for (int step = 1; step <= kEtaSteps; ++step) {
    const double eta = eta_at(step);
    const std::vector<double> etas(index.size(), eta);
    std::vector<double> automatic;
    std::vector<double> manual;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      auto r = detail::profile_rating(profiles[i], index.ratings(), etas, active);
      if (!r) continue;
      automatic.push_back(*r);
      manual.push_back(sample.manual[i]);
    }
    if (automatic.size() < options.min_support) continue;
    std::optional<double> value = options.rank_transform
                                      ? try_pearson(rank_transform(automatic), rank_transform(manual))
                                      : try_pearson(automatic, manual);
    if (value && (!best_value || *value > *best_value + detail::kTieTolerance)) {
      best_value = value;
      best_eta = eta;
    }
  }
  if (!best_value) throw DegenerateError("no global threshold yields a defined correlation");
  return best_eta;
}

}  // namespace exposure
