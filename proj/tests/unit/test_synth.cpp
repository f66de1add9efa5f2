#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "exposure/errors.hpp"
#include "exposure/io.hpp"
#include "exposure/stats.hpp"
#include "exposure/synth.hpp"
#include "../oracles.hpp"

using namespace exposure;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.n_users = 60;
  c.n_validation = 15;
  c.photos_per_user = 15;
  c.n_objects = 40;
  c.seed = seed;
  return c;
}

std::string serialize(const SynthOutput& out) {
  std::string s;
  for (const auto& p : out.dataset.profiles) s += to_json(p).dump();
  for (const auto& [code, m] : out.models) s += to_json(m).dump();
  s += ground_truth_csv(out.truth);
  s += dataset_hash(out.dataset);
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic and valid") {
  const auto a = generate(small(3));
  const auto b = generate(small(3));
  CHECK(serialize(a) == serialize(b));
  CHECK(serialize(a) != serialize(generate(small(4))));
  CHECK_NOTHROW(a.dataset.validate());
  CHECK(a.dataset.profiles.size() == 60);
  std::size_t validation = 0;
  for (const auto& [u, s] : a.dataset.split) validation += s == Split::Validation;
  CHECK(validation == 15);
  CHECK(a.models.size() == 4);
  for (const auto& p : a.dataset.profiles) CHECK(p.photos.size() == 15);
}

TEST_CASE("moment-matched BANK table") {
  SynthConfig c;
  c.n_users = 1;
  c.n_validation = 0;
  c.photos_per_user = 1;
  const auto out = generate(c);
  const auto stats = rating_table_stats(out.models.at("BANK"));
  CHECK(out.models.at("BANK").size() == 269);
  CHECK(std::fabs(stats.mean - (-0.13)) <= 0.03);
  CHECK(std::fabs(stats.stddev - 0.68) <= 0.05);
}

TEST_CASE("noise-free generation passes planted objects through") {
  auto c = small(8);
  c.detector.miss_rate = 0;
  c.detector.false_positive_rate = 0;
  c.label_noise_std = 0;
  const auto out = generate(c);
  // Rebuilding the planted rating from the emitted detections alone must
  // reproduce the oracle, which only holds when every planted object shows up
  // exactly once and nothing else does.
  std::map<std::string, SituationModel> planted;
  for (const auto& code : c.situations) planted.emplace(code, planted_ratings(c, code));
  for (const auto& t : out.truth) {
    const auto* p = out.dataset.find(t.user_id);
    const auto& table = planted.at(t.situation);
    double sum = 0;
    int photos = 0;
    for (const auto& photo : p->photos) {
      if (photo.detections.empty()) continue;
      double s = 0;
      for (const auto& d : photo.detections) {
        CHECK(d.confidence > 0.0);
        CHECK(d.confidence <= 1.0);
        s += oracle::focal(*table.rating(d.object_id), c.planted_k, c.planted_gamma);
      }
      sum += s / static_cast<double>(photo.detections.size());
      ++photos;
    }
    const double rebuilt = photos == 0 ? 0.0 : std::clamp(c.target_gain * sum / photos, -3.0, 3.0);
    CHECK(std::fabs(rebuilt - t.oracle) < 1e-9);
  }
  for (const auto& t : out.truth) {
    const auto* p = out.dataset.find(t.user_id);
    CHECK(t.truth == t.oracle);
    CHECK(planted_oracle_rating(*p, c, t.situation) == t.oracle);
  }
}

TEST_CASE("oracle tracks ground truth under light label noise") {
  auto c = small(9);
  c.label_noise_std = 0.05;
  const auto out = generate(c);
  for (const auto& code : c.situations) {
    std::vector<double> oracle, truth;
    for (const auto& t : out.truth) {
      if (t.situation != code) continue;
      oracle.push_back(planted_oracle_rating(*out.dataset.find(t.user_id), c, code));
      truth.push_back(t.truth);
    }
    CHECK(pearson(oracle, truth) >= 0.99);
  }
}

TEST_CASE("more label noise weakens the oracle correlation") {
  double previous = 1.1;
  for (double noise : {0.0, 0.3, 1.0}) {
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto c = small(seed);
      c.label_noise_std = noise;
      c.situations = {"ACC"};
      const auto out = generate(c);
      std::vector<double> o, t;
      for (const auto& g : out.truth) {
        o.push_back(g.oracle);
        t.push_back(g.truth);
      }
      total += pearson(o, t);
    }
    CHECK(total / 3 < previous);
    previous = total / 3;
  }
}

TEST_CASE("empty profiles are neutral and foreign profiles rejected") {
  const auto c = small(2);
  const auto out = generate(c);
  auto p = out.dataset.profiles.front();
  for (auto& photo : p.photos) photo.detections.clear();
  // the oracle reads latent state, so clearing detections changes nothing
  CHECK(planted_oracle_rating(p, c, "ACC") == planted_oracle_rating(out.dataset.profiles.front(), c, "ACC"));
  auto stranger = p;
  stranger.user_id = "someone";
  CHECK_THROWS_AS(planted_oracle_rating(stranger, c, "ACC"), ValidationError);

  auto zero = small(2);
  zero.objects_per_photo = 1e-9;
  zero.clutter_spread = 0;
  const auto quiet = generate(zero);
  for (const auto& t : quiet.truth) {
    if (t.oracle != 0.0) continue;
    CHECK(planted_oracle_rating(*quiet.dataset.find(t.user_id), zero, t.situation) == 0.0);
  }
  std::size_t zeros = 0;
  for (const auto& t : quiet.truth) zeros += t.oracle == 0.0;
  CHECK(zeros > 0);
}

TEST_CASE("config json round trip and validation") {
  const auto c = small(5);
  const auto back = SynthConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  auto j = c.to_json();
  j["unknown_field"] = 1;
  CHECK_THROWS_AS(SynthConfig::from_json(j), ValidationError);
  auto bad = c;
  bad.n_validation = bad.n_users + 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
