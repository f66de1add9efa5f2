#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "exposure/errors.hpp"
#include "exposure/forest.hpp"
#include "exposure/learning.hpp"
#include "exposure/pca.hpp"
#include "exposure/rng.hpp"
#include "exposure/synth.hpp"

using namespace exposure;

namespace {

std::size_t ceil_percent(int g, std::size_t n) {
  std::size_t m = 0;
  while (100 * m < static_cast<std::size_t>(g) * n) ++m;
  return m;
}

SynthOutput small_world(std::uint64_t seed, std::size_t users = 80) {
  SynthConfig c;
  c.n_users = users;
  c.n_validation = users / 4;
  c.photos_per_user = 20;
  c.n_objects = 30;
  c.situations = {"ACC"};
  c.objects_per_photo = 2.0;
  c.seed = seed;
  return generate(c);
}

GridSpec tiny_grid() {
  GridSpec g = GridSpec::quick();
  g.gamma = {0, 2};
  g.forest.n_trees = {10};
  return g;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("lervup-fr") == Method::LervupFocal);
  CHECK(parse_method("BASE_ETA") == Method::BaseEta);
  CHECK(parse_method("reg_pca") == Method::RegPca);
  CHECK(to_string(Method::BaseEtaFocal) == "BASE_ETA_FR");
  CHECK_THROWS_AS(parse_method("magic"), ValidationError);
  CHECK(all_methods().size() == 7);
  for (auto m : all_methods()) CHECK(parse_method(to_string(m)) == m);
}

TEST_CASE("forest regression properties") {
  SUBCASE("constant target") {
    Rng rng(1);
    FeatureMatrix x;
    std::vector<double> y;
    for (int i = 0; i < 50; ++i) {
      x.push_back({rng.uniform(), rng.uniform()});
      y.push_back(1.75);
    }
    const auto f = RandomForest::fit(x, y, ForestConfig{20, std::nullopt, 1, true, 0.5, 3});
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> probe{rng.uniform(-5, 5), rng.uniform(-5, 5)};
      CHECK(f.predict(probe) == 1.75);
    }
  }
  SUBCASE("a fully grown single tree memorizes") {
    Rng rng(2);
    FeatureMatrix x;
    std::vector<double> y;
    for (int i = 0; i < 80; ++i) {
      x.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
      y.push_back(rng.normal());
    }
    const auto f = RandomForest::fit(x, y, ForestConfig{1, std::nullopt, 1, false, 1.0, 0});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(f.predict(x[i]) == y[i]);
  }
  SUBCASE("linear target is learned") {
    Rng rng(3);
    auto sample = [&](FeatureMatrix& x, std::vector<double>& y, int n) {
      for (int i = 0; i < n; ++i) {
        x.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
        y.push_back(3 * x.back()[0]);
      }
    };
    FeatureMatrix x, hx;
    std::vector<double> y, hy;
    sample(x, y, 200);
    sample(hx, hy, 200);
    const auto f = RandomForest::fit(x, y, ForestConfig{100, std::nullopt, 1, true, 1.0, 9});
    double se = 0;
    for (std::size_t i = 0; i < hx.size(); ++i) se += std::pow(f.predict(hx[i]) - hy[i], 2);
    const double rmse = std::sqrt(se / hx.size());
    CHECK(rmse < 0.3 * stddev_of(hy));
  }
  SUBCASE("serialization round trip and determinism") {
    Rng rng(4);
    FeatureMatrix x;
    std::vector<double> y;
    for (int i = 0; i < 60; ++i) {
      x.push_back({rng.uniform(), rng.normal()});
      y.push_back(x.back()[0] - x.back()[1]);
    }
    const ForestConfig cfg{15, 6, 2, true, 0.5, 21};
    const auto a = RandomForest::fit(x, y, cfg);
    const auto b = RandomForest::fit(x, y, cfg);
    CHECK(a.to_json().dump() == b.to_json().dump());
    const auto c = RandomForest::from_json(nlohmann::json::parse(a.to_json().dump()));
    for (const auto& row : x) CHECK(c.predict(row) == a.predict(row));
    for (const auto& t : a.trees()) CHECK(t.depth() <= 6);
  }
  CHECK_THROWS_AS(RandomForest::fit({}, std::vector<double>{}, ForestConfig{}), ValidationError);
  CHECK_THROWS_AS(RandomForest::fit({{1.0}, {1.0, 2.0}}, std::vector<double>{1, 2}, ForestConfig{}), ValidationError);
}

TEST_CASE("PCA") {
  SUBCASE("one-dimensional data reconstructs exactly") {
    FeatureMatrix x;
    for (int i = 0; i < 20; ++i) x.push_back({1.0 * i, 2.0 * i, -1.0 * i});
    const auto p = fit_pca(x, 1);
    for (const auto& row : x) {
      const auto back = p.reconstruct(p.project(row));
      for (std::size_t d = 0; d < 3; ++d) CHECK(std::fabs(back[d] - row[d]) < 1e-9);
    }
    const auto zero = p.project(p.mean);
    CHECK(std::fabs(zero[0]) < 1e-12);
  }
  SUBCASE("full rank keeps the total variance") {
    Rng rng(5);
    FeatureMatrix x;
    for (int i = 0; i < 2000; ++i) x.push_back({rng.normal(), rng.normal()});
    const auto p = fit_pca(x, 2);
    double total = 0;
    for (int d = 0; d < 2; ++d) {
      double m = 0, ss = 0;
      for (const auto& r : x) m += r[d] / x.size();
      for (const auto& r : x) ss += (r[d] - m) * (r[d] - m) / x.size();
      total += ss;
    }
    const double explained = p.explained_variance[0] + p.explained_variance[1];
    CHECK(std::fabs(explained - total) < 0.01 * total);
    CHECK(p.explained_variance[0] >= p.explained_variance[1]);
    const auto q = PcaProjection::from_json(p.to_json());
    CHECK(q.project(x[3]) == p.project(x[3]));
  }
}

TEST_CASE("outlier removal") {
  SUBCASE("the far point goes") {
    Rng rng(6);
    FeatureMatrix x;
    for (int i = 0; i < 10; ++i) x.push_back({rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1)});
    x.push_back({40, -40, 40});
    const auto kept = remove_outliers(x, 0.5, 90);
    CHECK(kept.size() == 10);
    CHECK(std::find(kept.begin(), kept.end(), 10) == kept.end());
    CHECK(remove_outliers(x, 0.5, 100).size() == 11);
  }
  SUBCASE("identical points keep the ceiling count") {
    FeatureMatrix x(13, std::vector<double>{1, 1});
    const auto kept = remove_outliers(x, 0.1, 80);
    CHECK(kept.size() == ceil_percent(80, 13));
    CHECK(std::is_sorted(kept.begin(), kept.end()));
  }
  SUBCASE("exact counts for every grid value") {
    Rng rng(7);
    for (std::size_t n = 2; n <= 60; n += 7) {
      FeatureMatrix x;
      for (std::size_t i = 0; i < n; ++i) x.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
      for (int g : {80, 85, 90, 95, 100}) {
        const auto kept = remove_outliers(x, 0.3, g);
        CHECK(kept.size() == ceil_percent(g, n));
        CHECK(std::set<std::size_t>(kept.begin(), kept.end()).size() == kept.size());
      }
    }
  }
}

TEST_CASE("cross-validation folds partition the rows") {
  for (std::size_t n : {5u, 17u, 100u}) {
    const auto folds = cv_folds(n, 5, 42);
    CHECK(folds.size() == 5);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      CHECK(std::is_sorted(f.begin(), f.end()));
      for (auto i : f) seen[i]++;
    }
    CHECK(hi - lo <= 1);
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK(cv_folds(n, 5, 42) == folds);
  }
}

TEST_CASE("REG_RAW features are per-object contributions") {
  SituationModel m(Situation::from_code("ACC"), {{"book", 1.23}, {"cocaine", -2.84}, {"pistol", -2.5}});
  auto table = ThresholdTable::uniform(m, 0.5);
  FeaturePipeline pipe{Method::RegRaw, m, table};
  ProfileDetections p{"u", {{"p1", {{"book", 0.9, std::nullopt}}}, {"p2", {{"cocaine", 0.8, std::nullopt}}}, {"p3", {}}}};
  const auto f = pipe.features(p);
  REQUIRE(f.has_value());
  REQUIRE(f->size() == 3);
  CHECK(std::fabs((*f)[0] - 0.5535) < 1e-12);
  CHECK(std::fabs((*f)[1] + 1.136) < 1e-12);
  CHECK((*f)[2] == 0.0);
  ProfileDetections blank{"b", {{"p1", {{"book", 0.2, std::nullopt}}}}};
  CHECK_FALSE(pipe.features(blank).has_value());
}

TEST_CASE("training matrices omit uncovered users") {
  auto world = small_world(3);
  const auto& model = world.models.at("ACC");
  // one extra profile with nothing in it
  ProfileDetections empty{"zz_empty", {{"p0", {}}}};
  world.dataset.profiles.push_back(empty);
  world.dataset.split[empty.user_id] = Split::Train;
  world.dataset.manual[{empty.user_id, "ACC"}] = {empty.user_id, "ACC", {0}};
  const auto table = calibrate_and_select(world.dataset, model);
  PipelineOptions po;
  po.seed = 1;
  for (auto method : {Method::Lervup, Method::RegRaw, Method::RegPca}) {
    const auto pipe = fit_feature_pipeline(world.dataset, model, table, method, po);
    const auto tm = build_training_matrix(world.dataset, pipe, Split::Train);
    CHECK(std::find(tm.omitted.begin(), tm.omitted.end(), "zz_empty") != tm.omitted.end());
    CHECK(tm.x.size() == tm.y.size());
    const std::size_t dim = method == Method::Lervup ? 16 : method == Method::RegRaw ? model.size() : std::min<std::size_t>(16, model.size());
    for (const auto& row : tm.x) CHECK(row.size() == dim);
  }
}

TEST_CASE("grid search trace covers the grid and the winner replays") {
  const auto world = small_world(4);
  const auto& model = world.models.at("ACC");
  auto grid = tiny_grid();
  grid.g_percent = {90, 100};
  grid.forest.min_samples_leaf = {1, 2};
  TrainOptions options;
  options.seed = 9;
  for (auto method : all_methods()) {
    CAPTURE(to_string(method));
    const auto result = grid_search_train(world.dataset, model, method, grid, options);
    CHECK(result.trace.size() == grid.size(method));
    CHECK(result.model.method == method);
    const auto json = result.model.to_json().dump();
    const auto back = TrainedModel::from_json(nlohmann::json::parse(json));
    CHECK(back.to_json().dump() == json);
    CHECK(back.provenance_hash() == result.model.provenance_hash());
    for (const auto& p : world.dataset.profiles) {
      const auto a = predict(result.model, p);
      const auto b = predict(back, p);
      REQUIRE(a == b);
      if (a && is_learned(method)) REQUIRE(std::fabs(*a) <= 3.0);
    }
    const auto again = grid_search_train(world.dataset, model, method, grid, options);
    CHECK(again.model.to_json().dump() == json);
    CHECK(trace_to_csv(again.trace) == trace_to_csv(result.trace));
  }
}

TEST_CASE("a single grid point equals direct training") {
  const auto world = small_world(5);
  const auto& model = world.models.at("ACC");
  GridSpec grid = GridSpec::quick();
  grid.gamma = {0};
  grid.g_percent = {100};
  grid.forest.n_trees = {1};
  grid.forest.min_samples_leaf = {1};
  grid.forest.bootstrap = {false};
  grid.forest.feature_fraction = {1.0};
  TrainOptions options;
  options.seed = 12;
  const auto trained = grid_search_train(world.dataset, model, Method::RegRaw, grid, options).model;

  const auto table = calibrate_and_select(world.dataset, model);
  PipelineOptions po;
  po.seed = 12;
  const auto pipe = fit_feature_pipeline(world.dataset, model, table, Method::RegRaw, po);
  const auto tm = build_training_matrix(world.dataset, pipe, Split::Train);
  const auto direct = RandomForest::fit(tm.x, tm.y, *trained.hyper.forest);
  CHECK(direct.to_json().dump() == trained.forest->to_json().dump());

  // A memorizing tree returns each distinct training profile's target.
  std::set<std::vector<double>> seen;
  std::set<std::vector<double>> duplicated;
  for (const auto& row : tm.x) {
    if (!seen.insert(row).second) duplicated.insert(row);
  }
  for (std::size_t i = 0; i < tm.x.size(); ++i) {
    if (duplicated.count(tm.x[i])) continue;
    const auto* profile = world.dataset.find(tm.user_ids[i]);
    CHECK(*predict(trained, *profile) == tm.y[i]);
  }
}

TEST_CASE("grid search needs enough training profiles") {
  auto world = small_world(6, 12);
  const auto& model = world.models.at("ACC");
  TrainOptions options;
  CHECK_THROWS_AS(grid_search_train(world.dataset, model, Method::Lervup, tiny_grid(), options), DegenerateError);
}

TEST_CASE("grid spec validation and json") {
  GridSpec g;
  CHECK_NOTHROW(g.validate());
  CHECK(GridSpec::from_json(g.to_json()).to_json() == g.to_json());
  g.k_param = {3.0};
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = GridSpec{};
  g.g_percent = {0};
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = GridSpec{};
  g.epsilon = {};
  CHECK_THROWS_AS(g.validate(), ValidationError);
  CHECK_THROWS_AS(GridSpec::from_json(nlohmann::json{{"gamma", {-1}}}), ValidationError);
}

TEST_CASE("focal grid search prefers gamma > 0 on planted focal data") {
  int positive = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig c;
    c.n_users = 200;
    c.n_validation = 50;
    c.photos_per_user = 60;
    c.n_objects = 60;
    c.situations = {"WAIT"};
    c.objects_per_photo = 2.0;
    c.label_noise_std = 0.05;
    c.planted_gamma = 2;
    c.seed = seed;
    const auto world = generate(c);
    GridSpec grid = GridSpec::quick();
    grid.g_percent = {100};
    TrainOptions options;
    options.seed = seed;
    const auto r = grid_search_train(world.dataset, world.models.at("WAIT"), Method::LervupFocal, grid, options);
    if (r.model.hyper.focal && r.model.hyper.focal->gamma > 0) ++positive;
  }
  CHECK(positive >= 4);
}
