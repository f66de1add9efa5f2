#include "exposure/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "exposure/errors.hpp"
#include "exposure/rng.hpp"

namespace exposure {

namespace {

constexpr std::uint64_t kAblationStream = 404;

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::size_t method_rank(Method m) {
  const auto& all = all_methods();
  return static_cast<std::size_t>(std::find(all.begin(), all.end(), m) - all.begin());
}

}  // namespace

std::vector<std::string> EvaluationReport::situations() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (std::find(out.begin(), out.end(), e.situation) == out.end()) out.push_back(e.situation);
  }
  return out;
}

std::vector<Method> EvaluationReport::methods() const {
  std::set<std::size_t> ranks;
  for (const auto& e : entries) ranks.insert(method_rank(e.method));
  std::vector<Method> out;
  for (auto r : ranks) out.push_back(all_methods()[r]);
  return out;
}

const EvaluationEntry* EvaluationReport::find(const std::string& situation, Method method) const {
  for (const auto& e : entries) {
    if (e.situation == situation && e.method == method) return &e;
  }
  return nullptr;
}

std::optional<Method> EvaluationReport::best(const std::string& situation) const {
  std::optional<Method> best;
  std::optional<double> value;
  for (Method m : methods()) {
    const auto* e = find(situation, m);
    if (!e || !e->pearson) continue;
    if (!value || *e->pearson > *value) {
      value = e->pearson;
      best = m;
    }
  }
  return best;
}

std::string EvaluationReport::to_csv() const {
  std::ostringstream out;
  out << "situation,method,pearson,band,coverage,n,best\n";
  for (const auto& e : entries) {
    const auto b = best(e.situation);
    out << e.situation << ',' << to_string(e.method) << ','
        << (e.pearson ? fixed(*e.pearson) : "") << ',' << (e.band ? to_string(*e.band) : "") << ','
        << fixed(e.coverage) << ',' << e.n << ',' << (b && *b == e.method ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string EvaluationReport::to_markdown() const {
  const auto sits = situations();
  std::ostringstream out;
  out << "| Method |";
  for (const auto& s : sits) out << ' ' << s << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < sits.size(); ++i) out << "---|";
  out << '\n';
  for (Method m : methods()) {
    out << "| " << to_string(m) << " |";
    for (const auto& s : sits) {
      const auto* e = find(s, m);
      if (!e || !e->pearson) {
        out << " n/a |";
        continue;
      }
      const auto b = best(s);
      const bool is_best = b && *b == m;
      out << ' ' << (is_best ? "**" : "") << fixed(*e->pearson, 2) << (is_best ? "**" : "") << " |";
    }
    out << '\n';
  }
  out << "\nBest value per situation in bold. Correlation of automatic and manual profile ratings.\n";
  return out.str();
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    const auto b = best(e.situation);
    rows.push_back({{"situation", e.situation},
                    {"method", std::string(to_string(e.method))},
                    {"pearson", e.pearson ? nlohmann::json(*e.pearson) : nlohmann::json(nullptr)},
                    {"band", e.band ? nlohmann::json(std::string(to_string(*e.band))) : nlohmann::json(nullptr)},
                    {"coverage", e.coverage},
                    {"n", e.n},
                    {"best", b && *b == e.method}});
  }
  return {{"entries", rows}};
}

EvaluationEntry evaluate_model(const TrainedModel& model, const RatedProfileDataset& dataset,
                               std::optional<Split> split) {
  Coverage coverage;
  const auto series = evaluate_split(model, dataset, split, &coverage);
  EvaluationEntry e;
  e.situation = model.situation();
  e.method = model.method;
  e.coverage = coverage.fraction();
  e.n = series.size();
  if (series.size() >= 3) e.pearson = try_pearson(series.automatic, series.manual);
  if (e.pearson) e.band = cohen_band(*e.pearson);
  return e;
}

EvaluationReport evaluate_models(const std::vector<TrainedModel>& models,
                                 const RatedProfileDataset& dataset, std::optional<Split> split) {
  EvaluationReport report;
  for (const auto& m : models) report.entries.push_back(evaluate_model(m, dataset, split));
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const EvaluationEntry& a, const EvaluationEntry& b) {
                     if (a.situation != b.situation) return a.situation < b.situation;
                     return method_rank(a.method) < method_rank(b.method);
                   });
  return report;
}

PatternResult discover_patterns(const std::vector<Point>& rows, int k_min, int k_max,
                                std::uint64_t seed, SilhouetteMode mode) {
  if (k_min < 2 || k_max < k_min) throw ValidationError("pattern k range must satisfy 2 <= k_min <= k_max");
  if (rows.size() < static_cast<std::size_t>(k_max)) {
    throw ValidationError("pattern discovery needs at least k_max rows");
  }
  const std::size_t dim = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != dim) throw ValidationError("pattern rows differ in length");
  }
  std::set<Point> distinct(rows.begin(), rows.end());
  if (distinct.size() < 2) throw DegenerateError("all rows are identical; no pattern to discover");

  PatternResult best;
  bool found = false;
  for (int k = k_min; k <= k_max; ++k) {
    auto km = kmeans(rows, k, derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::set<int> used(km.assignment.begin(), km.assignment.end());
    if (used.size() < 2) continue;
    const double s = mean_silhouette(rows, km.assignment);
    best.silhouette_by_k[k] = s;
    const bool better = !found || (mode == SilhouetteMode::Maximize ? s > best.silhouette + 1e-12
                                                                   : s < best.silhouette - 1e-12);
    if (better) {
      best.k = k;
      best.centroids = km.centroids;
      best.assignments = km.assignment;
      best.silhouette = s;
      found = true;
    }
  }
  if (!found) throw DegenerateError("no k in range yields two non-empty clusters");
  return best;
}

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::Full: return "FULL";
    case AblationMode::Users50: return "USERS_50";
    case AblationMode::Objects50: return "OBJECTS_50";
  }
  return "FULL";
}

AblationMode parse_ablation_mode(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c != '_' && c != '-') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (s == "full") return AblationMode::Full;
  if (s == "users50") return AblationMode::Users50;
  if (s == "objects50") return AblationMode::Objects50;
  throw ValidationError("unknown ablation mode '" + std::string(text) + "'");
}

RatedProfileDataset drop_half_users(const RatedProfileDataset& dataset, std::uint64_t seed) {
  std::vector<std::string> train;
  for (const auto& p : dataset.profiles) {
    auto it = dataset.split.find(p.user_id);
    if (it != dataset.split.end() && it->second == Split::Train) train.push_back(p.user_id);
  }
  Rng rng(seed);
  rng.shuffle(train);
  std::set<std::string> dropped(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(train.size() / 2));
  RatedProfileDataset out;
  for (const auto& p : dataset.profiles) {
    if (!dropped.count(p.user_id)) out.profiles.push_back(p);
  }
  for (const auto& [key, m] : dataset.manual) {
    if (!dropped.count(key.first)) out.manual.emplace(key, m);
  }
  for (const auto& [user, s] : dataset.split) {
    if (!dropped.count(user)) out.split.emplace(user, s);
  }
  return out;
}

SituationModel drop_half_objects(const SituationModel& model, std::uint64_t seed) {
  auto list = model.to_list();
  Rng rng(seed);
  rng.shuffle(list);
  list.resize(list.size() - list.size() / 2);
  std::sort(list.begin(), list.end(),
            [](const ObjectRating& a, const ObjectRating& b) { return a.object_id < b.object_id; });
  return SituationModel(model.situation(), list, model.scale());
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json runs_json = nlohmann::json::array();
  for (const auto& r : runs) {
    runs_json.push_back({{"seed", r.seed},
                         {"validation_pearson", r.validation_pearson ? nlohmann::json(*r.validation_pearson)
                                                                     : nlohmann::json(nullptr)},
                         {"train_profiles", r.train_profiles},
                         {"objects", r.objects}});
  }
  return {{"situation", situation},
          {"method", std::string(to_string(method))},
          {"mode", std::string(to_string(mode))},
          {"runs", runs_json},
          {"mean", mean},
          {"stddev", stddev}};
}

AblationReport run_ablation(const RatedProfileDataset& dataset, const SituationModel& model,
                            Method method, AblationMode mode, const std::vector<std::uint64_t>& seeds,
                            const GridSpec& grid, const TrainOptions& options) {
  if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
  AblationReport report;
  report.situation = model.situation().code;
  report.method = method;
  report.mode = mode;
  std::vector<double> values;
  for (auto seed : seeds) {
    const auto reduction_seed = derive_seed(seed, kAblationStream);
    const auto data = mode == AblationMode::Users50 ? drop_half_users(dataset, reduction_seed) : dataset;
    const auto objects = mode == AblationMode::Objects50 ? drop_half_objects(model, reduction_seed) : model;
    TrainOptions o = options;
    o.seed = seed;
    const auto result = grid_search_train(data, objects, method, grid, o);
    AblationRun run;
    run.seed = seed;
    run.objects = objects.size();
    run.train_profiles = rated_sample(data, report.situation, Split::Train).size();
    const auto entry = evaluate_model(result.model, data, Split::Validation);
    run.validation_pearson = entry.pearson;
    if (entry.pearson) values.push_back(*entry.pearson);
    report.runs.push_back(run);
  }
  report.mean = mean_of(values);
  report.stddev = stddev_of(values);
  return report;
}

std::string ablation_to_csv(const std::vector<AblationReport>& reports) {
  std::ostringstream out;
  out << "situation,method,mode,seed,validation_pearson,train_profiles,objects\n";
  for (const auto& r : reports) {
    for (const auto& run : r.runs) {
      out << r.situation << ',' << to_string(r.method) << ',' << to_string(r.mode) << ',' << run.seed << ','
          << (run.validation_pearson ? fixed(*run.validation_pearson) : "") << ',' << run.train_profiles
          << ',' << run.objects << '\n';
    }
  }
  return out.str();
}

std::string ablation_to_markdown(const std::vector<AblationReport>& reports) {
  std::ostringstream out;
  out << "| Situation | Method | Mode | Runs | Mean | Std |\n|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out << "| " << r.situation << " | " << to_string(r.method) << " | " << to_string(r.mode) << " | "
        << r.runs.size() << " | " << fixed(r.mean) << " | " << fixed(r.stddev) << " |\n";
  }
  return out.str();
}

nlohmann::json AgreementReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    rows.push_back({{"user_id", items[i].first}, {"situation", items[i].second}, {"ad", index.per_item[i]}});
  }
  return {{"items", rows},
          {"mean_ad", index.mean},
          {"bound", kAcceptableAgreement},
          {"acceptable", acceptable},
          {"warnings", warnings}};
}

AgreementReport agreement_report(const std::vector<ManualProfileRating>& ratings) {
  std::map<std::pair<std::string, std::string>, std::vector<int>> grouped;
  for (const auto& r : ratings) {
    r.validate();
    auto& g = grouped[{r.user_id, r.situation}];
    g.insert(g.end(), r.rater_ratings.begin(), r.rater_ratings.end());
  }
  AgreementReport report;
  std::vector<std::vector<int>> items;
  for (const auto& [key, values] : grouped) {
    if (values.size() < 2) {
      report.warnings.push_back("skipped " + key.first + "/" + key.second + ": single rating");
      continue;
    }
    report.items.push_back(key);
    items.push_back(values);
  }
  if (items.empty()) throw DegenerateError("no item has at least two ratings");
  report.index = ad_index(items);
  report.acceptable = report.index.mean <= kAcceptableAgreement;
  if (!report.acceptable) {
    report.warnings.push_back("mean AD " + fixed(report.index.mean, 3) + " exceeds the acceptable bound " +
                              fixed(kAcceptableAgreement, 1));
  }
  return report;
}

}  // namespace exposure
