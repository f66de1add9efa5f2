#include "exposure/learning.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "exposure/errors.hpp"
#include "exposure/io.hpp"
#include "exposure/parallel.hpp"
#include "exposure/rng.hpp"

namespace exposure {

namespace {

constexpr std::uint64_t kClusterStream = 101;
constexpr std::uint64_t kForestStream = 202;
constexpr std::uint64_t kFoldStream = 303;
constexpr double kTie = 1e-12;

std::string normalize_name(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return s;
}

std::string number(std::optional<double> v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

double clamp_rating(double r) { return std::clamp(r, kLikertMin, kLikertMax); }

std::optional<double> score_series(const std::vector<double>& automatic,
                                   const std::vector<double>& manual) {
  if (automatic.size() < 3) return std::nullopt;
  return try_pearson(automatic, manual);
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Base: return "BASE";
    case Method::BaseEta: return "BASE_ETA";
    case Method::BaseEtaFocal: return "BASE_ETA_FR";
    case Method::RegRaw: return "REG_RAW";
    case Method::RegPca: return "REG_PCA";
    case Method::Lervup: return "LERVUP";
    case Method::LervupFocal: return "LERVUP_FR";
  }
  return "BASE";
}

Method parse_method(std::string_view text) {
  const auto name = normalize_name(text);
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw ValidationError("unknown method '" + std::string(text) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll = {Method::Base,   Method::BaseEta, Method::BaseEtaFocal,
                                           Method::RegRaw, Method::RegPca,  Method::Lervup,
                                           Method::LervupFocal};
  return kAll;
}

bool is_learned(Method method) {
  return method == Method::RegRaw || method == Method::RegPca || method == Method::Lervup ||
         method == Method::LervupFocal;
}

bool uses_focal(Method method) {
  return method == Method::BaseEtaFocal || method == Method::LervupFocal;
}

// ---------------------------------------------------------------------------
// Grid

GridSpec GridSpec::quick() {
  GridSpec g;
  g.k_param = {10};
  g.gamma = {0, 1, 2, 3};
  g.epsilon = {0.1};
  g.g_percent = {90, 100};
  g.forest.n_trees = {50};
  g.forest.max_depth = {std::nullopt};
  g.forest.min_samples_leaf = {2};
  g.forest.bootstrap = {true};
  g.forest.feature_fraction = {1.0 / 3.0};
  return g;
}

void GridSpec::validate() const {
  if (k_param.empty() || gamma.empty() || epsilon.empty() || g_percent.empty()) {
    throw ValidationError("grid value lists must not be empty");
  }
  for (double k : k_param) {
    if (!(k > kLikertMax)) throw ValidationError("focal k must exceed 3");
  }
  for (int g : gamma) {
    if (g < 0) throw ValidationError("focal gamma must be non-negative");
  }
  for (double e : epsilon) {
    if (!(e > 0.0)) throw ValidationError("epsilon must be positive");
  }
  for (int g : g_percent) {
    if (g <= 0 || g > 100) throw ValidationError("G must lie in (0, 100]");
  }
  if (forest.n_trees.empty() || forest.max_depth.empty() || forest.min_samples_leaf.empty() ||
      forest.bootstrap.empty() || forest.feature_fraction.empty()) {
    throw ValidationError("forest grid lists must not be empty");
  }
  if (cv_folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (clusters < 1) throw ValidationError("cluster count must be positive");
  if (pca_dim < 1) throw ValidationError("PCA dimension must be positive");
  for (const auto& c : forest_configs(0)) c.validate();
}

std::vector<ForestConfig> GridSpec::forest_configs(std::uint64_t seed) const {
  std::vector<ForestConfig> out;
  for (int n : forest.n_trees) {
    for (const auto& depth : forest.max_depth) {
      for (int leaf : forest.min_samples_leaf) {
        for (bool boot : forest.bootstrap) {
          for (double ff : forest.feature_fraction) {
            out.push_back(ForestConfig{n, depth, leaf, boot, ff, seed});
          }
        }
      }
    }
  }
  return out;
}

std::size_t GridSpec::size(Method method) const {
  const std::size_t focal = k_param.size() * gamma.size();
  const std::size_t learned = epsilon.size() * g_percent.size() * forest_configs(0).size();
  switch (method) {
    case Method::Base:
    case Method::BaseEta: return 1;
    case Method::BaseEtaFocal: return focal;
    case Method::LervupFocal: return focal * learned;
    default: return learned;
  }
}

nlohmann::json GridSpec::to_json() const {
  nlohmann::json depth = nlohmann::json::array();
  for (const auto& d : forest.max_depth) depth.push_back(d ? nlohmann::json(*d) : nlohmann::json(nullptr));
  return {{"k_param", k_param},
          {"gamma", gamma},
          {"epsilon", epsilon},
          {"g_percent", g_percent},
          {"forest",
           {{"n_trees", forest.n_trees},
            {"max_depth", depth},
            {"min_samples_leaf", forest.min_samples_leaf},
            {"bootstrap", forest.bootstrap},
            {"feature_fraction", forest.feature_fraction}}},
          {"cv_folds", cv_folds},
          {"clusters", clusters},
          {"pca_dim", pca_dim}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  GridSpec g;
  try {
    if (j.contains("k_param")) g.k_param = j.at("k_param").get<std::vector<double>>();
    if (j.contains("gamma")) g.gamma = j.at("gamma").get<std::vector<int>>();
    if (j.contains("epsilon")) g.epsilon = j.at("epsilon").get<std::vector<double>>();
    if (j.contains("g_percent")) g.g_percent = j.at("g_percent").get<std::vector<int>>();
    if (j.contains("forest")) {
      const auto& f = j.at("forest");
      if (f.contains("n_trees")) g.forest.n_trees = f.at("n_trees").get<std::vector<int>>();
      if (f.contains("max_depth")) {
        g.forest.max_depth.clear();
        for (const auto& d : f.at("max_depth")) {
          g.forest.max_depth.push_back(d.is_null() ? std::nullopt : std::optional<int>(d.get<int>()));
        }
      }
      if (f.contains("min_samples_leaf")) g.forest.min_samples_leaf = f.at("min_samples_leaf").get<std::vector<int>>();
      if (f.contains("bootstrap")) g.forest.bootstrap = f.at("bootstrap").get<std::vector<bool>>();
      if (f.contains("feature_fraction")) g.forest.feature_fraction = f.at("feature_fraction").get<std::vector<double>>();
    }
    if (j.contains("cv_folds")) g.cv_folds = j.at("cv_folds").get<int>();
    if (j.contains("clusters")) g.clusters = j.at("clusters").get<int>();
    if (j.contains("pca_dim")) g.pca_dim = j.at("pca_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("grid: ") + e.what());
  }
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// Outlier removal

std::vector<std::size_t> remove_outliers(const FeatureMatrix& descriptors, double epsilon,
                                         int g_percent) {
  const std::size_t n = descriptors.size();
  if (g_percent <= 0 || g_percent > 100) throw ValidationError("G must lie in (0, 100]");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (g_percent == 100) return all;
  if (n < 2) throw ValidationError("outlier removal needs at least two descriptors");

  const std::size_t dim = descriptors.front().size();
  const auto pca = fit_pca(descriptors, std::min<std::size_t>(2, dim));
  std::vector<std::vector<double>> plane;
  plane.reserve(n);
  for (const auto& row : descriptors) plane.push_back(pca.project(row));
  for (std::size_t c = 0; c < pca.output_dim(); ++c) {
    double mean = 0.0;
    for (const auto& p : plane) mean += p[c];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& p : plane) ss += (p[c] - mean) * (p[c] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    for (auto& p : plane) p[c] = sd > 0.0 ? (p[c] - mean) / sd : 0.0;
  }

  std::vector<std::size_t> neighbours(n, 0);
  std::vector<double> summed(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < plane[i].size(); ++c) {
        const double d = plane[i][c] - plane[j][c];
        d2 += d * d;
      }
      const double d = std::sqrt(d2);
      summed[i] += d;
      if (d <= epsilon) ++neighbours[i];
    }
  }
  std::sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
    if (neighbours[a] != neighbours[b]) return neighbours[a] > neighbours[b];
    if (summed[a] != summed[b]) return summed[a] < summed[b];
    return a < b;
  });
  const std::size_t keep = (static_cast<std::size_t>(g_percent) * n + 99) / 100;
  all.resize(keep);
  std::sort(all.begin(), all.end());
  return all;
}

// ---------------------------------------------------------------------------
// Features

std::optional<std::vector<double>> FeaturePipeline::features(const ProfileDetections& profile) const {
  switch (method) {
    case Method::Lervup:
    case Method::LervupFocal: {
      if (!clusters) throw ValidationError("LERVUP pipeline has no cluster model");
      const auto descriptors = profile_descriptors(profile, ratings, thresholds);
      if (descriptors.empty()) return std::nullopt;
      return user_descriptor(profile.user_id, descriptors, *clusters, variance_mode).values;
    }
    case Method::RegRaw:
    case Method::RegPca: {
      const auto terms = object_contributions(profile, ratings, thresholds, selection_of(thresholds));
      if (!terms) return std::nullopt;
      std::vector<double> raw;
      raw.reserve(terms->size());
      for (const auto& [id, v] : *terms) raw.push_back(v);
      if (method == Method::RegRaw) return raw;
      if (!pca) throw ValidationError("REG_PCA pipeline has no projection");
      return pca->project(raw);
    }
    default:
      throw ValidationError("baseline methods have no feature pipeline");
  }
}

FeaturePipeline fit_feature_pipeline(const RatedProfileDataset& dataset, const SituationModel& model,
                                     const ThresholdTable& thresholds, Method method,
                                     const PipelineOptions& options) {
  if (!is_learned(method)) throw ValidationError("baseline methods have no feature pipeline");
  FeaturePipeline pipeline{
      method,
      options.focal ? apply_focal(model, options.focal->k_param, options.focal->gamma) : model,
      thresholds, std::nullopt, std::nullopt, options.variance_mode};
  const auto sample = rated_sample(dataset, model.situation().code, options.fit_split);

  if (method == Method::Lervup || method == Method::LervupFocal) {
    std::vector<ImageDescriptor> all;
    for (const auto* p : sample.profiles) {
      auto d = profile_descriptors(*p, pipeline.ratings, thresholds);
      all.insert(all.end(), d.begin(), d.end());
    }
    pipeline.clusters = fit_clusters(all, options.clusters, derive_seed(options.seed, kClusterStream));
  } else if (method == Method::RegPca) {
    FeatureMatrix raw;
    FeaturePipeline raw_pipeline = pipeline;
    raw_pipeline.method = Method::RegRaw;
    for (const auto* p : sample.profiles) {
      if (auto f = raw_pipeline.features(*p)) raw.push_back(std::move(*f));
    }
    if (raw.size() < 2) throw DegenerateError("REG_PCA needs at least two covered profiles");
    const auto dim = std::min<std::size_t>(static_cast<std::size_t>(options.pca_dim), raw.front().size());
    pipeline.pca = fit_pca(raw, dim);
  }
  return pipeline;
}

TrainingMatrix build_training_matrix(const RatedProfileDataset& dataset,
                                     const FeaturePipeline& pipeline, std::optional<Split> split) {
  TrainingMatrix m;
  const auto sample = rated_sample(dataset, pipeline.thresholds.situation, split);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto* p = sample.profiles[i];
    if (auto f = pipeline.features(*p)) {
      m.x.push_back(std::move(*f));
      m.y.push_back(sample.manual[i]);
      m.user_ids.push_back(p->user_id);
    } else {
      m.omitted.push_back(p->user_id);
    }
  }
  if (m.x.empty()) throw DegenerateError("no rated profile has an eligible photo");
  return m;
}

// ---------------------------------------------------------------------------
// Trained model

SituationModel TrainedModel::effective_ratings() const {
  if (hyper.focal) return apply_focal(model, hyper.focal->k_param, hyper.focal->gamma);
  return model;
}

ThresholdTable TrainedModel::effective_thresholds() const {
  if (method == Method::Base && hyper.global_eta) return ThresholdTable::uniform(model, *hyper.global_eta);
  return thresholds;
}

DetectorSelection TrainedModel::selection() const { return selection_of(effective_thresholds()); }

FeaturePipeline TrainedModel::pipeline() const {
  return FeaturePipeline{method, effective_ratings(), thresholds, clusters, pca, variance_mode};
}

std::optional<double> predict(const TrainedModel& model, const ProfileDetections& profile) {
  switch (model.method) {
    case Method::Base:
      return rate_profile_baseline(profile, model.model, model.thresholds, model.selection(),
                                   {BaselineVariant::Base, model.hyper.global_eta, std::nullopt});
    case Method::BaseEta:
      return rate_profile_baseline(profile, model.model, model.thresholds, model.selection(),
                                   {BaselineVariant::BaseEta, std::nullopt, std::nullopt});
    case Method::BaseEtaFocal:
      return rate_profile_baseline(profile, model.model, model.thresholds, model.selection(),
                                   {BaselineVariant::BaseEtaFocal, std::nullopt, model.hyper.focal});
    default: break;
  }
  if (!model.forest) throw ValidationError("learned model has no forest");
  const auto f = model.pipeline().features(profile);
  if (!f) return std::nullopt;
  return clamp_rating(model.forest->predict(*f));
}

std::vector<std::string> eligible_photos(const TrainedModel& model, const ProfileDetections& profile) {
  std::vector<std::string> out;
  if (model.method == Method::Lervup || model.method == Method::LervupFocal) {
    for (const auto& d : profile_descriptors(profile, model.effective_ratings(), model.thresholds)) {
      out.push_back(d.photo_id);
    }
    return out;
  }
  const auto table = model.effective_thresholds();
  const auto selection = selection_of(table);
  for (const auto& photo : profile.photos) {
    const bool any = std::any_of(photo.detections.begin(), photo.detections.end(), [&](const DetectionRecord& d) {
      return model.model.contains(d.object_id) && selection.is_active(d.object_id) &&
             d.confidence >= table.eta_for(d.object_id);
    });
    if (any) out.push_back(photo.photo_id);
  }
  return out;
}

RatingSeries evaluate_split(const TrainedModel& model, const RatedProfileDataset& dataset,
                            std::optional<Split> split, Coverage* coverage) {
  RatingSeries series;
  const auto sample = rated_sample(dataset, model.situation(), split);
  Coverage cov;
  cov.total = sample.size();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (auto r = predict(model, *sample.profiles[i])) {
      series.add(sample.profiles[i]->user_id, *r, sample.manual[i]);
      ++cov.rated;
    }
  }
  if (coverage) *coverage = cov;
  return series;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
nlohmann::json opt(const std::optional<int>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

template <typename T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json hyper_json = {
      {"focal", hyper.focal ? nlohmann::json{{"k_param", hyper.focal->k_param}, {"gamma", hyper.focal->gamma}}
                            : nlohmann::json(nullptr)},
      {"global_eta", opt(hyper.global_eta)},
      {"epsilon", opt(hyper.epsilon)},
      {"g_percent", opt(hyper.g_percent)},
      {"forest", hyper.forest ? exposure::to_json(*hyper.forest) : nlohmann::json(nullptr)}};
  return {{"format", "exposure-model"},
          {"version", 1},
          {"method", std::string(to_string(method))},
          {"situation_model", exposure::to_json(model)},
          {"thresholds", exposure::to_json(thresholds)},
          {"hyperparameters", std::move(hyper_json)},
          {"variance_mode", variance_mode == VarianceMode::Trace ? "trace" : "mean"},
          {"clusters", clusters ? exposure::to_json(*clusters) : nlohmann::json(nullptr)},
          {"pca", pca ? pca->to_json() : nlohmann::json(nullptr)},
          {"forest", forest ? forest->to_json() : nlohmann::json(nullptr)},
          {"provenance", {{"seed", seed}, {"dataset_hash", dataset_hash}}},
          {"scores", {{"cv_pearson", opt(cv_pearson)}, {"validation_pearson", opt(validation_pearson)}}}};
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "exposure-model") throw ValidationError("not an exposure model artifact");
    if (j.value("version", 0) != 1) throw ValidationError("unsupported model artifact version");
    TrainedModel m{parse_method(j.at("method").get<std::string>()),
                   situation_model_from_json(j.at("situation_model")),
                   threshold_table_from_json(j.at("thresholds"))};
    const auto& h = j.at("hyperparameters");
    if (!h.at("focal").is_null()) {
      m.hyper.focal = FocalParams{h.at("focal").at("k_param").get<double>(), h.at("focal").at("gamma").get<int>()};
    }
    m.hyper.global_eta = get_opt<double>(h, "global_eta");
    m.hyper.epsilon = get_opt<double>(h, "epsilon");
    m.hyper.g_percent = get_opt<int>(h, "g_percent");
    if (!h.at("forest").is_null()) m.hyper.forest = forest_config_from_json(h.at("forest"));
    m.variance_mode = j.value("variance_mode", "mean") == "trace" ? VarianceMode::Trace : VarianceMode::MeanOfAttributes;
    if (!j.at("clusters").is_null()) m.clusters = cluster_model_from_json(j.at("clusters"));
    if (!j.at("pca").is_null()) m.pca = PcaProjection::from_json(j.at("pca"));
    if (!j.at("forest").is_null()) m.forest = RandomForest::from_json(j.at("forest"));
    m.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    m.dataset_hash = j.at("provenance").at("dataset_hash").get<std::string>();
    m.cv_pearson = get_opt<double>(j.at("scores"), "cv_pearson");
    m.validation_pearson = get_opt<double>(j.at("scores"), "validation_pearson");
    if (is_learned(m.method) && !m.forest) throw ValidationError("learned model artifact has no forest");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model artifact: ") + e.what());
  }
}

std::string TrainedModel::provenance_hash() const { return hex64(fnv1a64(to_json().dump())); }

// ---------------------------------------------------------------------------
// Search

std::vector<std::vector<std::size_t>> cv_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < n; ++i) out[i % static_cast<std::size_t>(folds)].push_back(order[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out << "method,k_param,gamma,global_eta,epsilon,g_percent,n_trees,max_depth,min_samples_leaf,"
         "bootstrap,feature_fraction,retained,cv_mean,cv_std,validation_pearson\n";
  for (const auto& r : trace) {
    out << to_string(r.method) << ',' << (r.focal ? number(r.focal->k_param) : "") << ','
        << (r.focal ? std::to_string(r.focal->gamma) : "") << ',' << number(r.global_eta) << ','
        << number(r.epsilon) << ',' << (r.g_percent ? std::to_string(*r.g_percent) : "") << ',';
    if (r.forest) {
      out << r.forest->n_trees << ',' << (r.forest->max_depth ? std::to_string(*r.forest->max_depth) : "none")
          << ',' << r.forest->min_samples_leaf << ',' << (r.forest->bootstrap ? "true" : "false") << ','
          << number(r.forest->feature_fraction);
    } else {
      out << ",,,,";
    }
    out << ',' << r.retained << ',' << number(r.cv_mean) << ',' << number(r.cv_std) << ','
        << number(r.validation_pearson) << '\n';
  }
  return out.str();
}

namespace {

std::optional<double> validation_score(const TrainedModel& model, const RatedProfileDataset& dataset) {
  const auto series = evaluate_split(model, dataset, Split::Validation);
  return score_series(series.automatic, series.manual);
}

bool better(const std::optional<double>& candidate, const std::optional<double>& best) {
  if (!candidate) return false;
  return !best || *candidate > *best + kTie;
}

TrainResult train_baseline(const RatedProfileDataset& dataset, const SituationModel& model,
                           Method method, const GridSpec& grid, const TrainOptions& options,
                           const CalibrationOptions& calibration) {
  TrainedModel base{method, model, ThresholdTable::uniform(model, 1.0)};
  base.seed = options.seed;
  base.dataset_hash = options.dataset_hash;
  base.variance_mode = options.variance_mode;
  std::vector<TraceRow> trace;

  if (method == Method::Base) {
    const double eta = optimize_global_eta(dataset, model, calibration);
    base.thresholds = ThresholdTable::uniform(model, eta);
    base.hyper.global_eta = eta;
    base.validation_pearson = validation_score(base, dataset);
    TraceRow row{method};
    row.global_eta = eta;
    row.validation_pearson = base.validation_pearson;
    trace.push_back(row);
    return {std::move(base), std::move(trace)};
  }

  base.thresholds = calibrate_and_select(dataset, model, calibration);
  if (method == Method::BaseEta) {
    base.validation_pearson = validation_score(base, dataset);
    TraceRow row{method};
    row.validation_pearson = base.validation_pearson;
    trace.push_back(row);
    return {std::move(base), std::move(trace)};
  }

  std::optional<TrainedModel> best;
  for (double k : grid.k_param) {
    for (int gamma : grid.gamma) {
      TraceRow row{method};
      row.focal = FocalParams{k, gamma};
      TrainedModel candidate = base;
      candidate.hyper.focal = row.focal;
      try {
        const auto focal_model = apply_focal(model, k, gamma);
        candidate.thresholds.tau_threshold =
            select_detectors(dataset, focal_model, base.thresholds, calibration).tau_threshold;
        candidate.validation_pearson = validation_score(candidate, dataset);
      } catch (const DegenerateError&) {
        candidate.validation_pearson.reset();
      }
      row.validation_pearson = candidate.validation_pearson;
      trace.push_back(row);
      if (!best || better(candidate.validation_pearson, best->validation_pearson)) {
        if (!best || candidate.validation_pearson) best = std::move(candidate);
      }
    }
  }
  return {std::move(*best), std::move(trace)};
}

struct FocalFeatures {
  std::optional<FocalParams> focal;
  FeaturePipeline pipeline;
  TrainingMatrix train;
  TrainingMatrix validation;
};

struct SettingResult {
  std::vector<TraceRow> rows;
  std::size_t best_forest = 0;
  std::vector<std::size_t> retained;
  std::optional<double> validation;
  std::optional<double> cv_mean;
};

}  // namespace

TrainResult grid_search_train(const RatedProfileDataset& dataset, const SituationModel& model,
                              Method method, const GridSpec& grid, const TrainOptions& options) {
  grid.validate();
  const auto& situation = model.situation().code;
  const auto train_sample = rated_sample(dataset, situation, Split::Train);
  if (train_sample.size() < 10) {
    throw DegenerateError("grid search needs at least 10 rated training profiles");
  }
  CalibrationOptions calibration = options.calibration;
  if (calibration.jobs == 0) calibration.jobs = options.jobs;

  if (!is_learned(method)) return train_baseline(dataset, model, method, grid, options, calibration);

  const auto thresholds = calibrate_and_select(dataset, model, calibration);

  std::vector<std::optional<FocalParams>> focal_points;
  if (uses_focal(method)) {
    for (double k : grid.k_param) {
      for (int g : grid.gamma) focal_points.emplace_back(FocalParams{k, g});
    }
  } else {
    focal_points.emplace_back(std::nullopt);
  }

  // Features per focal point. gamma = 0 leaves ratings untouched.
  std::vector<std::optional<FocalFeatures>> features(focal_points.size());
  parallel_for(focal_points.size(), options.jobs, [&](std::size_t i) {
    PipelineOptions po;
    if (focal_points[i] && focal_points[i]->gamma > 0) po.focal = focal_points[i];
    po.clusters = grid.clusters;
    po.pca_dim = grid.pca_dim;
    po.seed = options.seed;
    po.variance_mode = options.variance_mode;
    auto pipeline = fit_feature_pipeline(dataset, model, thresholds, method, po);
    auto train = build_training_matrix(dataset, pipeline, Split::Train);
    TrainingMatrix validation;
    try {
      validation = build_training_matrix(dataset, pipeline, Split::Validation);
    } catch (const DegenerateError&) {
    }
    features[i] = FocalFeatures{focal_points[i], std::move(pipeline), std::move(train), std::move(validation)};
  });

  const auto forests = grid.forest_configs(derive_seed(options.seed, kForestStream));
  struct Setting {
    std::size_t focal_index;
    double epsilon;
    int g_percent;
  };
  std::vector<Setting> settings;
  for (std::size_t f = 0; f < focal_points.size(); ++f) {
    for (double e : grid.epsilon) {
      for (int g : grid.g_percent) settings.push_back({f, e, g});
    }
  }

  std::vector<SettingResult> results(settings.size());
  parallel_for(settings.size(), options.jobs, [&](std::size_t s) {
    const auto& setting = settings[s];
    const auto& ff = *features[setting.focal_index];
    const auto retained = remove_outliers(ff.train.x, setting.epsilon, setting.g_percent);
    if (retained.size() < 5 || retained.size() < static_cast<std::size_t>(grid.cv_folds)) {
      throw DegenerateError("fewer than 5 training profiles survive outlier removal");
    }
    FeatureMatrix x;
    std::vector<double> y;
    for (auto i : retained) {
      x.push_back(ff.train.x[i]);
      y.push_back(ff.train.y[i]);
    }
    const auto folds = cv_folds(x.size(), grid.cv_folds, derive_seed(options.seed, kFoldStream));

    SettingResult result;
    result.retained = retained;
    std::optional<double> best_cv;
    for (std::size_t c = 0; c < forests.size(); ++c) {
      std::vector<double> scores;
      for (const auto& fold : folds) {
        FeatureMatrix fx;
        std::vector<double> fy;
        std::vector<char> held(x.size(), 0);
        for (auto i : fold) held[i] = 1;
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (!held[i]) {
            fx.push_back(x[i]);
            fy.push_back(y[i]);
          }
        }
        const auto forest = RandomForest::fit(fx, fy, forests[c]);
        std::vector<double> pred, truth;
        for (auto i : fold) {
          pred.push_back(clamp_rating(forest.predict(x[i])));
          truth.push_back(y[i]);
        }
        scores.push_back(try_pearson(pred, truth).value_or(0.0));
      }
      TraceRow row{method};
      row.focal = ff.focal;
      row.epsilon = setting.epsilon;
      row.g_percent = setting.g_percent;
      row.forest = forests[c];
      row.retained = retained.size();
      row.cv_mean = mean_of(scores);
      row.cv_std = stddev_of(scores);
      if (better(row.cv_mean, best_cv)) {
        best_cv = row.cv_mean;
        result.best_forest = c;
      }
      result.rows.push_back(row);
    }
    result.cv_mean = best_cv;

    if (!ff.validation.x.empty()) {
      const auto forest = RandomForest::fit(x, y, forests[result.best_forest]);
      std::vector<double> pred;
      for (const auto& row : ff.validation.x) pred.push_back(clamp_rating(forest.predict(row)));
      result.validation = score_series(pred, ff.validation.y);
    }
    result.rows[result.best_forest].validation_pearson = result.validation;
    results[s] = std::move(result);
  });

  // Winner: highest validation correlation; CV mean when no validation data.
  const bool have_validation = std::any_of(results.begin(), results.end(),
                                           [](const SettingResult& r) { return r.validation.has_value(); });
  std::size_t winner = 0;
  std::optional<double> best_score;
  for (std::size_t s = 0; s < results.size(); ++s) {
    const auto score = have_validation ? results[s].validation : results[s].cv_mean;
    if (better(score, best_score)) {
      best_score = score;
      winner = s;
    }
  }

  TrainResult out{TrainedModel{method, model, thresholds}, {}};
  for (auto& r : results) out.trace.insert(out.trace.end(), r.rows.begin(), r.rows.end());

  const auto& setting = settings[winner];
  const auto& ff = *features[setting.focal_index];
  const auto& result = results[winner];
  FeatureMatrix x;
  std::vector<double> y;
  for (auto i : result.retained) {
    x.push_back(ff.train.x[i]);
    y.push_back(ff.train.y[i]);
  }
  auto& m = out.model;
  m.hyper.focal = ff.focal;
  m.hyper.epsilon = setting.epsilon;
  m.hyper.g_percent = setting.g_percent;
  m.hyper.forest = forests[result.best_forest];
  m.clusters = ff.pipeline.clusters;
  m.pca = ff.pipeline.pca;
  m.forest = RandomForest::fit(x, y, forests[result.best_forest]);
  m.variance_mode = options.variance_mode;
  m.seed = options.seed;
  m.dataset_hash = options.dataset_hash;
  m.cv_pearson = result.cv_mean;
  m.validation_pearson = result.validation;
  return out;
}

}  // namespace exposure
