#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "exposure/core.hpp"

namespace exposure {

// Thresholds and correlation thresholds are searched on 0.01 grids.
inline constexpr int kEtaSteps = 100;
inline constexpr int kTauSteps = 100;

inline double eta_at(int step) { return static_cast<double>(step) / kEtaSteps; }
inline double tau_at(int step) { return static_cast<double>(step) / kTauSteps; }

/// Calibrated detection threshold of one object detector.
struct ObjectThreshold {
  double eta = 1.0;
  double tau = -1.0;
  std::size_t support = 0;  // profiles with a valid detection at eta
  bool degenerate = true;   // never selectable

  friend bool operator==(const ObjectThreshold&, const ObjectThreshold&) = default;
};

/// Per-object thresholds for one situation plus the detector-subset cut.
struct ThresholdTable {
  std::string situation;
  std::map<std::string, ObjectThreshold> objects;
  double tau_threshold = -1.0;
  // Threshold for objects absent from the table (unrated detector classes).
  double default_eta = 0.5;

  double eta_for(const std::string& object_id) const;

  // Every object of `model` at one shared threshold, all selectable.
  static ThresholdTable uniform(const SituationModel& model, double eta);

  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;
};

struct DetectorSelection {
  double tau_threshold = -1.0;
  std::set<std::string> active_objects;

  bool is_active(const std::string& object_id) const { return active_objects.count(object_id) != 0; }
};

// Non-degenerate objects whose tau reaches the cut.
DetectorSelection selection_at(const ThresholdTable& table, double tau_threshold);
inline DetectorSelection selection_of(const ThresholdTable& table) {
  return selection_at(table, table.tau_threshold);
}

// Confidence when it reaches eta (inclusive), else 0.
double filter_detection(const DetectionRecord& detection, double eta);

/// Profile rating with a single detector active at threshold `eta`; nullopt
/// when no photo holds a valid detection of the object.
std::optional<double> single_object_rating(const ProfileDetections& profile,
                                           const std::string& object_id, double rating,
                                           double eta);

struct CalibrationOptions {
  // Which split drives the search; nullopt uses every rated profile.
  std::optional<Split> split = Split::Train;
  // Correlate ranks instead of values.
  bool rank_transform = false;
  std::size_t min_support = 3;
  unsigned jobs = 0;
};

ObjectThreshold calibrate_object_threshold(const RatedProfileDataset& dataset,
                                           const SituationModel& model,
                                           const std::string& object_id,
                                           const CalibrationOptions& options = {});

// Calibrates every object of the model; tau_threshold is left at -1.
ThresholdTable calibrate_thresholds(const RatedProfileDataset& dataset, const SituationModel& model,
                                    const CalibrationOptions& options = {});

/// Searches the tau grid for the detector subset whose profile ratings
/// correlate best with manual ratings. Throws DegenerateError when no
/// candidate subset yields a defined correlation.
DetectorSelection select_detectors(const RatedProfileDataset& dataset, const SituationModel& model,
                                   const ThresholdTable& thresholds,
                                   const CalibrationOptions& options = {});

// Calibration followed by selection; the returned table carries the cut.
ThresholdTable calibrate_and_select(const RatedProfileDataset& dataset, const SituationModel& model,
                                    const CalibrationOptions& options = {});

}  // namespace exposure
