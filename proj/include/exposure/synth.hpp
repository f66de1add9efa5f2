#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "exposure/core.hpp"

namespace exposure {

struct DetectorNoise {
  double tp_alpha = 6.0;  // Beta parameters of true-positive confidences
  double tp_beta = 2.0;
  double fp_alpha = 2.0;  // Beta parameters of false-positive confidences
  double fp_beta = 5.0;
  double false_positive_rate = 0.2;  // expected spurious detections per photo, < 1
  double miss_rate = 0.1;
};

/// Generator settings. All randomness derives from `seed`.
struct SynthConfig {
  std::size_t n_users = 500;
  std::size_t n_validation = 100;
  std::size_t photos_per_user = 100;
  std::size_t n_objects = 269;
  std::vector<std::string> situations{"ACC", "BANK", "IT", "WAIT"};
  // Match the crowd-table moments of the built-in situations; custom codes
  // use mean 0 and deviation 0.65.
  bool match_moments = true;
  double objects_per_photo = 2.5;   // Poisson mean of true objects per photo
  std::size_t max_objects_per_photo = 8;
  double taste_strength = 1.0;      // how strongly a user's taste tilts object usage
  double clutter_spread = 1.5;      // log-scale spread of per-user object rates
  double quality_spread = 0.5;      // log-scale spread of per-user detection quality
  DetectorNoise detector;
  double rating_noise_std = 0.0;    // published table = planted ratings + noise
  double label_noise_std = 0.1;
  int planted_gamma = 2;
  double planted_k = 10.0;
  double target_gain = 2.0;
  std::size_t n_raters = 9;
  double rater_noise_std = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct GroundTruth {
  std::string user_id;
  std::string situation;
  double truth = 0.0;   // continuous rating the raters perturb
  double oracle = 0.0;  // same without label noise
};

struct SynthOutput {
  std::map<std::string, SituationModel> models;  // published tables
  RatedProfileDataset dataset;
  std::vector<GroundTruth> truth;
};

SynthOutput generate(const SynthConfig& config);

/// Noise-free planted rating of a generated profile, recomputed from the
/// generator's latent state. Throws ValidationError when the profile does not
/// come from `config`.
double planted_oracle_rating(const ProfileDetections& profile, const SynthConfig& config,
                             const std::string& situation);

// Planted (pre-noise) object ratings of one situation.
SituationModel planted_ratings(const SynthConfig& config, const std::string& situation);

std::string ground_truth_csv(const std::vector<GroundTruth>& truth);

}  // namespace exposure
