#include "exposure/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "exposure/errors.hpp"
#include "exposure/io.hpp"
#include "exposure/parallel.hpp"
#include "exposure/rng.hpp"
#include "exposure/stats.hpp"

namespace exposure {

namespace {

constexpr double kSituationCorrelation = 0.8;

double round_to(double x, double scale) { return std::round(x * scale) / scale; }

struct Moments {
  double mean;
  double stddev;
};

Moments target_moments(const std::string& code) {
  if (code == "ACC") return {0.03, 0.70};
  if (code == "BANK") return {-0.13, 0.68};
  if (code == "IT") return {0.09, 0.58};
  if (code == "WAIT") return {0.27, 0.60};
  return {0.0, 0.65};
}

std::string object_name(std::size_t i, std::size_t n) {
  const int width = n > 1000 ? 4 : 3;
  char buf[32];
  std::snprintf(buf, sizeof buf, "o%0*zu", width, i);
  return buf;
}

std::string user_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u%05zu", i);
  return buf;
}

std::string photo_name(const std::string& user, std::size_t j) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_p%03zu", user.c_str(), j);
  return buf;
}

// Latent object world shared by every user.
struct World {
  std::vector<std::string> ids;
  std::vector<double> valence;
  std::vector<double> popularity;
};

World make_world(const SynthConfig& c) {
  World w;
  Rng rng(derive_seed(c.seed, 1));
  for (std::size_t o = 0; o < c.n_objects; ++o) {
    w.ids.push_back(object_name(o, c.n_objects));
    const double v = rng.bernoulli(0.3) ? rng.normal(0.0, 1.6) : rng.normal(0.0, 0.35);
    w.valence.push_back(v);
    w.popularity.push_back(std::exp(rng.normal(0.0, 0.5) - 0.6 * std::abs(v)));
  }
  return w;
}

std::vector<double> planted_values(const SynthConfig& c, const World& w, const std::string& code) {
  Rng rng(derive_seed(c.seed, fnv1a64(code)));
  const double rho = kSituationCorrelation;
  std::vector<double> r(w.valence.size());
  for (std::size_t o = 0; o < r.size(); ++o) {
    r[o] = rho * w.valence[o] + std::sqrt(1.0 - rho * rho) * rng.normal();
  }
  const Moments target = c.match_moments ? target_moments(code) : Moments{0.0, 0.65};
  // Affine match, then clamp; a few rounds absorb the clamping shift.
  for (int round = 0; round < 5 && r.size() > 1; ++round) {
    const double mean = mean_of(r);
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(r.size()));
    for (double& x : r) {
      const double z = sd > 0.0 ? (x - mean) / sd : 0.0;
      x = std::clamp(target.mean + target.stddev * z, kLikertMin, kLikertMax);
    }
  }
  if (r.size() == 1) r[0] = std::clamp(target.mean, kLikertMin, kLikertMax);
  for (double& x : r) x = round_to(x, 100.0);
  return r;
}

struct UserContent {
  double taste = 0.0;
  std::vector<std::vector<std::size_t>> photos;  // true objects per photo
};

UserContent user_content(const SynthConfig& c, const World& w, std::size_t user) {
  const std::uint64_t user_seed = derive_seed(derive_seed(c.seed, 2), user);
  Rng rng(derive_seed(user_seed, 1));
  UserContent content;
  content.taste = rng.normal();
  const double rate = c.objects_per_photo * std::exp(c.clutter_spread * rng.normal());
  std::vector<double> cumulative(w.ids.size());
  double total = 0.0;
  for (std::size_t o = 0; o < w.ids.size(); ++o) {
    total += w.popularity[o] * std::exp(c.taste_strength * content.taste * w.valence[o]);
    cumulative[o] = total;
  }
  content.photos.resize(c.photos_per_user);
  for (auto& photo : content.photos) {
    const std::size_t n = std::min(rng.poisson(rate), c.max_objects_per_photo);
    for (std::size_t k = 0; k < n; ++k) {
      const double u = rng.uniform() * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      photo.push_back(static_cast<std::size_t>(it - cumulative.begin()));
    }
  }
  return content;
}

double planted_rating(const SynthConfig& c, const UserContent& content,
                      const std::vector<double>& focal) {
  double sum = 0.0;
  std::size_t photos = 0;
  for (const auto& photo : content.photos) {
    if (photo.empty()) continue;
    double s = 0.0;
    for (auto o : photo) s += focal[o];
    sum += s / static_cast<double>(photo.size());
    ++photos;
  }
  if (photos == 0) return 0.0;
  return std::clamp(c.target_gain * sum / static_cast<double>(photos), kLikertMin, kLikertMax);
}

BoundingBox random_box(Rng& rng) {
  const double w = round_to(rng.uniform(0.05, 0.5), 1e4);
  const double h = round_to(rng.uniform(0.05, 0.5), 1e4);
  const double x = std::floor(rng.uniform() * (1.0 - w) * 1e4) / 1e4;
  const double y = std::floor(rng.uniform() * (1.0 - h) * 1e4) / 1e4;
  return {x, y, w, h};
}

double confidence(Rng& rng, double a, double b) {
  return std::clamp(round_to(rng.beta(a, b), 1e4), 1e-4, 1.0);
}

ProfileDetections detect(const SynthConfig& c, const World& w, const UserContent& content,
                         std::size_t user) {
  const std::uint64_t user_seed = derive_seed(derive_seed(c.seed, 2), user);
  Rng rng(derive_seed(user_seed, 2));
  const auto& d = c.detector;
  // Per-user photo quality scales true-positive confidences.
  const double quality = std::exp(c.quality_spread * rng.normal());
  ProfileDetections profile{user_name(user), {}};
  for (std::size_t j = 0; j < content.photos.size(); ++j) {
    PhotoDetections photo{photo_name(profile.user_id, j), {}};
    for (auto o : content.photos[j]) {
      if (rng.bernoulli(d.miss_rate)) continue;
      const double conf = confidence(rng, d.tp_alpha * quality, d.tp_beta / quality);
      photo.detections.push_back({w.ids[o], conf, random_box(rng)});
    }
    const std::size_t spurious = rng.poisson(d.false_positive_rate);
    for (std::size_t k = 0; k < spurious; ++k) {
      const auto o = rng.below(w.ids.size());
      const double conf = confidence(rng, d.fp_alpha, d.fp_beta);
      photo.detections.push_back({w.ids[o], conf, random_box(rng)});
    }
    rng.shuffle(photo.detections);
    profile.photos.push_back(std::move(photo));
  }
  return profile;
}

std::vector<double> focal_values(const SynthConfig& c, const std::vector<double>& ratings) {
  std::vector<double> out;
  out.reserve(ratings.size());
  for (double r : ratings) out.push_back(focal_rating(r, c.planted_k, c.planted_gamma));
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_users == 0 || photos_per_user == 0 || n_objects == 0 || n_raters == 0) {
    throw ValidationError("synth counts must be positive");
  }
  if (n_validation > n_users) throw ValidationError("more validation users than users");
  if (situations.empty()) throw ValidationError("synth needs at least one situation");
  std::set<std::string> codes(situations.begin(), situations.end());
  if (codes.size() != situations.size()) throw ValidationError("duplicate situation code");
  for (const auto& s : situations) {
    if (s.empty()) throw ValidationError("empty situation code");
  }
  const auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
  if (!rate_ok(detector.miss_rate) || !rate_ok(detector.false_positive_rate)) {
    throw ValidationError("detector rates must lie in [0, 1)");
  }
  if (!(detector.tp_alpha > 0 && detector.tp_beta > 0 && detector.fp_alpha > 0 && detector.fp_beta > 0)) {
    throw ValidationError("Beta parameters must be positive");
  }
  if (rating_noise_std < 0 || label_noise_std < 0 || rater_noise_std < 0 || objects_per_photo < 0 ||
      taste_strength < 0 || clutter_spread < 0 || quality_spread < 0 || target_gain < 0) {
    throw ValidationError("synth noise levels and rates must be non-negative");
  }
  if (planted_gamma < 0) throw ValidationError("planted_gamma must be non-negative");
  if (!(planted_k > kLikertMax)) throw ValidationError("planted_k must exceed 3");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"n_users", n_users},
          {"n_validation", n_validation},
          {"photos_per_user", photos_per_user},
          {"n_objects", n_objects},
          {"situations", situations},
          {"match_moments", match_moments},
          {"objects_per_photo", objects_per_photo},
          {"max_objects_per_photo", max_objects_per_photo},
          {"taste_strength", taste_strength},
          {"clutter_spread", clutter_spread},
          {"quality_spread", quality_spread},
          {"detector",
           {{"tp_alpha", detector.tp_alpha},
            {"tp_beta", detector.tp_beta},
            {"fp_alpha", detector.fp_alpha},
            {"fp_beta", detector.fp_beta},
            {"false_positive_rate", detector.false_positive_rate},
            {"miss_rate", detector.miss_rate}}},
          {"rating_noise_std", rating_noise_std},
          {"label_noise_std", label_noise_std},
          {"planted_gamma", planted_gamma},
          {"planted_k", planted_k},
          {"target_gain", target_gain},
          {"n_raters", n_raters},
          {"rater_noise_std", rater_noise_std},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    if (!j.is_object()) throw ValidationError("synth config must be a JSON object");
    const std::set<std::string> known = {"n_users", "n_validation", "photos_per_user", "n_objects",
                                         "situations", "match_moments", "objects_per_photo",
                                         "max_objects_per_photo", "taste_strength", "clutter_spread", "quality_spread", "detector",
                                         "rating_noise_std", "label_noise_std", "planted_gamma",
                                         "planted_k", "target_gain", "n_raters", "rater_noise_std", "seed"};
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw ValidationError("unknown synth config field '" + key + "'");
    }
    c.n_users = j.value("n_users", c.n_users);
    c.n_validation = j.value("n_validation", c.n_validation);
    c.photos_per_user = j.value("photos_per_user", c.photos_per_user);
    c.n_objects = j.value("n_objects", c.n_objects);
    c.situations = j.value("situations", c.situations);
    c.match_moments = j.value("match_moments", c.match_moments);
    c.objects_per_photo = j.value("objects_per_photo", c.objects_per_photo);
    c.max_objects_per_photo = j.value("max_objects_per_photo", c.max_objects_per_photo);
    c.taste_strength = j.value("taste_strength", c.taste_strength);
    c.clutter_spread = j.value("clutter_spread", c.clutter_spread);
    c.quality_spread = j.value("quality_spread", c.quality_spread);
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      c.detector.tp_alpha = d.value("tp_alpha", c.detector.tp_alpha);
      c.detector.tp_beta = d.value("tp_beta", c.detector.tp_beta);
      c.detector.fp_alpha = d.value("fp_alpha", c.detector.fp_alpha);
      c.detector.fp_beta = d.value("fp_beta", c.detector.fp_beta);
      c.detector.false_positive_rate = d.value("false_positive_rate", c.detector.false_positive_rate);
      c.detector.miss_rate = d.value("miss_rate", c.detector.miss_rate);
    }
    c.rating_noise_std = j.value("rating_noise_std", c.rating_noise_std);
    c.label_noise_std = j.value("label_noise_std", c.label_noise_std);
    c.planted_gamma = j.value("planted_gamma", c.planted_gamma);
    c.planted_k = j.value("planted_k", c.planted_k);
    c.target_gain = j.value("target_gain", c.target_gain);
    c.n_raters = j.value("n_raters", c.n_raters);
    c.rater_noise_std = j.value("rater_noise_std", c.rater_noise_std);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SituationModel planted_ratings(const SynthConfig& config, const std::string& situation) {
  config.validate();
  const auto world = make_world(config);
  const auto values = planted_values(config, world, situation);
  std::vector<ObjectRating> ratings;
  for (std::size_t o = 0; o < values.size(); ++o) ratings.push_back({world.ids[o], values[o]});
  return SituationModel(Situation::from_code(situation), ratings);
}

SynthOutput generate(const SynthConfig& config) {
  config.validate();
  const auto world = make_world(config);
  SynthOutput out;

  std::vector<std::vector<double>> focal;
  for (const auto& code : config.situations) {
    const auto planted = planted_values(config, world, code);
    focal.push_back(focal_values(config, planted));
    Rng noise(derive_seed(derive_seed(config.seed, fnv1a64(code)), 1));
    std::vector<ObjectRating> published;
    for (std::size_t o = 0; o < planted.size(); ++o) {
      double r = planted[o];
      if (config.rating_noise_std > 0.0) {
        r = round_to(std::clamp(r + noise.normal(0.0, config.rating_noise_std), kLikertMin, kLikertMax), 100.0);
      }
      published.push_back({world.ids[o], r});
    }
    out.models.emplace(code, SituationModel(Situation::from_code(code), published));
  }

  struct UserResult {
    ProfileDetections profile;
    std::vector<GroundTruth> truth;
    std::vector<ManualProfileRating> manual;
  };
  std::vector<UserResult> users(config.n_users);
  parallel_for(config.n_users, 0, [&](std::size_t i) {
    const auto content = user_content(config, world, i);
    UserResult r{detect(config, world, content, i), {}, {}};
    const std::uint64_t user_seed = derive_seed(derive_seed(config.seed, 2), i);
    for (std::size_t s = 0; s < config.situations.size(); ++s) {
      const auto& code = config.situations[s];
      Rng rng(derive_seed(user_seed, fnv1a64(code)));
      const double oracle = planted_rating(config, content, focal[s]);
      const double truth = std::clamp(oracle + rng.normal(0.0, config.label_noise_std), kLikertMin, kLikertMax);
      ManualProfileRating m{r.profile.user_id, code, {}};
      for (std::size_t k = 0; k < config.n_raters; ++k) {
        const double v = std::round(truth + rng.normal(0.0, config.rater_noise_std));
        m.rater_ratings.push_back(static_cast<int>(std::clamp(v, kLikertMin, kLikertMax)));
      }
      r.truth.push_back({r.profile.user_id, code, truth, oracle});
      r.manual.push_back(std::move(m));
    }
    users[i] = std::move(r);
  });

  std::vector<std::size_t> order(config.n_users);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(config.seed, 3));
  split_rng.shuffle(order);
  std::vector<char> validation(config.n_users, 0);
  for (std::size_t i = 0; i < config.n_validation; ++i) validation[order[i]] = 1;

  for (std::size_t i = 0; i < users.size(); ++i) {
    auto& u = users[i];
    const auto id = u.profile.user_id;
    out.dataset.split[id] = validation[i] ? Split::Validation : Split::Train;
    for (auto& m : u.manual) out.dataset.manual[{id, m.situation}] = std::move(m);
    out.truth.insert(out.truth.end(), u.truth.begin(), u.truth.end());
    out.dataset.profiles.push_back(std::move(u.profile));
  }
  out.dataset.validate();
  return out;
}

double planted_oracle_rating(const ProfileDetections& profile, const SynthConfig& config,
                             const std::string& situation) {
  config.validate();
  if (std::find(config.situations.begin(), config.situations.end(), situation) == config.situations.end()) {
    throw ValidationError("situation " + situation + " is not generated by this config");
  }
  std::size_t user = 0;
  if (profile.user_id.size() != 6 || profile.user_id[0] != 'u' ||
      std::sscanf(profile.user_id.c_str() + 1, "%zu", &user) != 1 || user >= config.n_users ||
      user_name(user) != profile.user_id) {
    throw ValidationError("profile " + profile.user_id + " is not from this generator");
  }
  if (profile.photos.size() != config.photos_per_user) {
    throw ValidationError("profile " + profile.user_id + " has an unexpected photo count");
  }
  for (std::size_t j = 0; j < profile.photos.size(); ++j) {
    if (profile.photos[j].photo_id != photo_name(profile.user_id, j)) {
      throw ValidationError("profile " + profile.user_id + " has unexpected photo ids");
    }
  }
  const auto world = make_world(config);
  const auto focal = focal_values(config, planted_values(config, world, situation));
  return planted_rating(config, user_content(config, world, user), focal);
}

std::string ground_truth_csv(const std::vector<GroundTruth>& truth) {
  std::ostringstream out;
  out << "user_id,situation,truth,oracle\n";
  char buf[128];
  for (const auto& t : truth) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", t.truth, t.oracle);
    out << t.user_id << ',' << t.situation << buf;
  }
  return out.str();
}

}  // namespace exposure
