#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exposure/clustering.hpp"
#include "exposure/core.hpp"
#include "exposure/learning.hpp"
#include "exposure/stats.hpp"

namespace exposure {

struct EvaluationEntry {
  std::string situation;
  Method method = Method::Base;
  std::optional<double> pearson;  // nullopt when fewer than 3 covered profiles or constant
  std::optional<CohenBand> band;
  double coverage = 0.0;
  std::size_t n = 0;  // covered profiles entering the correlation
};

/// Correlation of every (situation, method) against manual ratings, in the
/// layout of a methods x situations table.
struct EvaluationReport {
  std::vector<EvaluationEntry> entries;

  std::vector<std::string> situations() const;
  std::vector<Method> methods() const;
  const EvaluationEntry* find(const std::string& situation, Method method) const;
  // Highest-correlation method per situation; first in method order on ties.
  std::optional<Method> best(const std::string& situation) const;

  std::string to_csv() const;
  std::string to_markdown() const;
  nlohmann::json to_json() const;
};

EvaluationEntry evaluate_model(const TrainedModel& model, const RatedProfileDataset& dataset,
                               std::optional<Split> split = Split::Validation);

// Entries sorted by situation, then method order.
EvaluationReport evaluate_models(const std::vector<TrainedModel>& models,
                                 const RatedProfileDataset& dataset,
                                 std::optional<Split> split = Split::Validation);

enum class SilhouetteMode { Maximize, Minimize };

struct PatternResult {
  int k = 0;
  std::vector<Point> centroids;
  std::vector<int> assignments;
  double silhouette = 0.0;
  std::map<int, double> silhouette_by_k;
};

/// k-means for every k in [k_min, k_max]; k chosen by mean silhouette
/// (smallest k on ties). Throws DegenerateError when the rows hold fewer than
/// two distinct points.
PatternResult discover_patterns(const std::vector<Point>& rows, int k_min, int k_max,
                                std::uint64_t seed, SilhouetteMode mode = SilhouetteMode::Maximize);

enum class AblationMode { Full, Users50, Objects50 };

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view text);

// Drops a seeded random half of the TRAIN profiles (with their ratings).
RatedProfileDataset drop_half_users(const RatedProfileDataset& dataset, std::uint64_t seed);
// Keeps a seeded random ceil(w/2) of the objects.
SituationModel drop_half_objects(const SituationModel& model, std::uint64_t seed);

struct AblationRun {
  std::uint64_t seed = 0;
  std::optional<double> validation_pearson;
  std::size_t train_profiles = 0;
  std::size_t objects = 0;
};

struct AblationReport {
  std::string situation;
  Method method = Method::LervupFocal;
  AblationMode mode = AblationMode::Full;
  std::vector<AblationRun> runs;
  double mean = 0.0;    // over runs with a defined correlation
  double stddev = 0.0;  // population

  nlohmann::json to_json() const;
};

/// Retrains `method` once per seed on the reduced data and scores it on the
/// VALIDATION split. The seed drives both the reduction and the training.
AblationReport run_ablation(const RatedProfileDataset& dataset, const SituationModel& model,
                            Method method, AblationMode mode, const std::vector<std::uint64_t>& seeds,
                            const GridSpec& grid, const TrainOptions& options);

std::string ablation_to_csv(const std::vector<AblationReport>& reports);
std::string ablation_to_markdown(const std::vector<AblationReport>& reports);

struct AgreementReport {
  std::vector<std::pair<std::string, std::string>> items;  // (user_id, situation)
  AgreementIndex index;
  bool acceptable = true;  // mean AD within kAcceptableAgreement
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Items with a single rater are skipped with a warning.
AgreementReport agreement_report(const std::vector<ManualProfileRating>& ratings);

}  // namespace exposure
