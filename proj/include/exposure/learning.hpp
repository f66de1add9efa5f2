#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exposure/baseline.hpp"
#include "exposure/calibration.hpp"
#include "exposure/core.hpp"
#include "exposure/descriptors.hpp"
#include "exposure/forest.hpp"
#include "exposure/pca.hpp"
#include "exposure/stats.hpp"

namespace exposure {

/// Profile rating methods, in report column order.
enum class Method { Base, BaseEta, BaseEtaFocal, RegRaw, RegPca, Lervup, LervupFocal };

std::string_view to_string(Method method);
// Accepts "LERVUP_FR", "lervup-fr", "base_eta" and similar spellings.
Method parse_method(std::string_view text);
const std::vector<Method>& all_methods();
bool is_learned(Method method);
bool uses_focal(Method method);

struct ForestGrid {
  std::vector<int> n_trees{100};
  std::vector<std::optional<int>> max_depth{4, 8, std::nullopt};
  std::vector<int> min_samples_leaf{1, 2, 5};
  std::vector<bool> bootstrap{true, false};
  std::vector<double> feature_fraction{1.0 / 3.0, 1.0};
};

/// Hyperparameter grid. Focal and outlier values default to the published
/// tuning table.
struct GridSpec {
  std::vector<double> k_param{10, 15, 20, 25};
  std::vector<int> gamma{0, 1, 2, 3, 4};
  std::vector<double> epsilon{0.05, 0.1, 0.15, 0.2};
  std::vector<int> g_percent{80, 85, 90, 95, 100};
  ForestGrid forest;
  int cv_folds = 5;
  int clusters = kDefaultClusters;
  int pca_dim = 16;

  // Small grid for smoke runs: one forest configuration, gamma 0..3.
  static GridSpec quick();

  void validate() const;
  // Forest configurations in grid order, all sharing `seed`.
  std::vector<ForestConfig> forest_configs(std::uint64_t seed) const;
  // Grid points a method evaluates.
  std::size_t size(Method method) const;

  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);
};

/// Keeps the ceil(g_percent * N / 100) rows lying in the densest regions of
/// the standardized 2-D principal plane: ranked by neighbours within
/// `epsilon`, then by smaller summed distance, then by index. Returns the
/// kept row indices in ascending order.
std::vector<std::size_t> remove_outliers(const FeatureMatrix& descriptors, double epsilon,
                                         int g_percent);

/// Fitted state mapping a profile to the feature vector of a learned method.
struct FeaturePipeline {
  Method method = Method::Lervup;
  SituationModel ratings;  // focal-transformed when the method uses focal
  ThresholdTable thresholds;
  std::optional<ClusterModel> clusters;
  std::optional<PcaProjection> pca;
  VarianceMode variance_mode = VarianceMode::MeanOfAttributes;

  // nullopt when the profile has no eligible photo.
  std::optional<std::vector<double>> features(const ProfileDetections& profile) const;
};

struct TrainingMatrix {
  FeatureMatrix x;
  std::vector<double> y;
  std::vector<std::string> user_ids;
  std::vector<std::string> omitted;  // rated users without an eligible photo
};

struct PipelineOptions {
  std::optional<FocalParams> focal;
  int clusters = kDefaultClusters;
  int pca_dim = 16;
  std::uint64_t seed = 0;
  Split fit_split = Split::Train;
  VarianceMode variance_mode = VarianceMode::MeanOfAttributes;
};

/// Fits the feature pipeline of a learned method on the rated profiles of
/// `options.fit_split`. `thresholds` must carry the detector-subset cut.
FeaturePipeline fit_feature_pipeline(const RatedProfileDataset& dataset, const SituationModel& model,
                                     const ThresholdTable& thresholds, Method method,
                                     const PipelineOptions& options);

TrainingMatrix build_training_matrix(const RatedProfileDataset& dataset,
                                     const FeaturePipeline& pipeline, std::optional<Split> split);

struct Hyperparameters {
  std::optional<FocalParams> focal;
  std::optional<double> global_eta;
  std::optional<double> epsilon;
  std::optional<int> g_percent;
  std::optional<ForestConfig> forest;
};

/// A rating method ready to score profiles, with everything needed to
/// replay its pipeline.
struct TrainedModel {
  Method method = Method::BaseEta;
  SituationModel model;       // object ratings as crowdsourced
  ThresholdTable thresholds;  // calibrated, with the selection cut
  Hyperparameters hyper;
  std::optional<ClusterModel> clusters;
  std::optional<PcaProjection> pca;
  std::optional<RandomForest> forest;
  VarianceMode variance_mode = VarianceMode::MeanOfAttributes;
  std::uint64_t seed = 0;
  std::string dataset_hash;
  std::optional<double> cv_pearson;
  std::optional<double> validation_pearson;

  const std::string& situation() const { return thresholds.situation; }
  // Ratings the method works with (focal-transformed when applicable).
  SituationModel effective_ratings() const;
  // Thresholds the method filters detections with.
  ThresholdTable effective_thresholds() const;
  DetectorSelection selection() const;
  FeaturePipeline pipeline() const;

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
  // Hash of the serialized artifact.
  std::string provenance_hash() const;
};

// nullopt when the profile has no eligible photo. Forest outputs are clamped
// to [-3, 3]; baseline ratings are returned as computed.
std::optional<double> predict(const TrainedModel& model, const ProfileDetections& profile);

/// Photos that enter the method's rating: photos with an activated
/// detection for baselines and REG_*, photos with a valid detection for
/// LERVUP variants.
std::vector<std::string> eligible_photos(const TrainedModel& model, const ProfileDetections& profile);

struct Coverage {
  std::size_t rated = 0;
  std::size_t total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(rated) / static_cast<double>(total); }
};

/// Predictions against manual ratings for one split; uncovered profiles are
/// left out of the series and counted in the coverage.
RatingSeries evaluate_split(const TrainedModel& model, const RatedProfileDataset& dataset,
                            std::optional<Split> split, Coverage* coverage = nullptr);

struct TraceRow {
  Method method = Method::Lervup;
  std::optional<FocalParams> focal;
  std::optional<double> global_eta;
  std::optional<double> epsilon;
  std::optional<int> g_percent;
  std::optional<ForestConfig> forest;
  std::size_t retained = 0;
  std::optional<double> cv_mean;
  std::optional<double> cv_std;
  std::optional<double> validation_pearson;  // set for candidates checked on validation
};

std::string trace_to_csv(const std::vector<TraceRow>& trace);

struct TrainOptions {
  CalibrationOptions calibration;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::string dataset_hash;
  VarianceMode variance_mode = VarianceMode::MeanOfAttributes;
};

struct TrainResult {
  TrainedModel model;
  std::vector<TraceRow> trace;
};

/// Grid search: for every focal and outlier setting the forest
/// configurations are scored by k-fold cross-validated correlation on the
/// retained training profiles; the best forest per setting is then scored on
/// the validation split, and the highest validation correlation wins.
/// Baseline methods search their own parameters the same way.
TrainResult grid_search_train(const RatedProfileDataset& dataset, const SituationModel& model,
                              Method method, const GridSpec& grid, const TrainOptions& options);

// Folds of a seeded permutation of [0, n): position i goes to fold i % folds.
std::vector<std::vector<std::size_t>> cv_folds(std::size_t n, int folds, std::uint64_t seed);

}  // namespace exposure
