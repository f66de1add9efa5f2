// Command-line front end: synth, calibrate, train, evaluate, ablate, rate,
// patterns, agreement, reference, serve.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "exposure/analysis.hpp"
#include "exposure/calibration.hpp"
#include "exposure/errors.hpp"
#include "exposure/io.hpp"
#include "exposure/learning.hpp"
#include "exposure/parallel.hpp"
#include "exposure/service.hpp"
#include "exposure/synth.hpp"

namespace fs = std::filesystem;
using namespace exposure;
using nlohmann::json;

namespace {

constexpr const char* kOutEnv = "EXPOSURE_OUT_DIR";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::string format = "json";
};

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> configs;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const auto now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json j = {{"command", command},    {"argv", argv},     {"configs", configs},
              {"dataset_hash", dataset_hash}, {"seed", seed}, {"outputs", outputs},
              {"timings", {{"total_seconds", elapsed}}}, {"finished_at", stamp}};
    write_text_atomic(path, dump(j));
  }
};

// Explicit flag first, then the environment override.
fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  throw UsageError(std::string("--out is required (or set ") + kOutEnv + ")");
}

void emit(const std::string& text, const std::string& out, RunManifest* manifest = nullptr) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_text_atomic(p, text);
  if (manifest) manifest->outputs.push_back(p.string());
}

std::pair<long long, long long> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoll(text);
      return {v, v};
    }
    return {std::stoll(text.substr(0, dots)), std::stoll(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw UsageError("malformed range '" + text + "' (expected A..B)");
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto [a, b] = parse_range(part);
    if (a < 0 || b < a) throw UsageError("malformed seed list '" + text + "'");
    for (auto s = a; s <= b; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (seeds.empty()) throw UsageError("empty seed list");
  return seeds;
}

std::vector<Method> parse_methods(const std::string& text) {
  if (text == "all") return all_methods();
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_method(part));
  return out;
}

std::map<std::string, SituationModel> situation_tables(const std::string& dataset, const std::string& dir) {
  auto tables = load_situation_models(dir.empty() ? fs::path(dataset) : fs::path(dir));
  if (tables.empty()) throw ValidationError("no situation tables found under " + (dir.empty() ? dataset : dir));
  return tables;
}

std::vector<std::string> chosen_situations(const std::string& flag, const std::map<std::string, SituationModel>& tables) {
  std::vector<std::string> out;
  if (flag.empty() || flag == "all") {
    for (const auto& [code, m] : tables) out.push_back(code);
    return out;
  }
  std::stringstream ss(flag);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!tables.count(part)) throw ValidationError("no situation table for " + part);
    out.push_back(part);
  }
  return out;
}

GridSpec load_grid(const std::string& path, const std::string& preset) {
  if (!path.empty()) return GridSpec::from_json(read_json(path));
  if (preset == "quick") return GridSpec::quick();
  if (preset == "full") return GridSpec{};
  throw UsageError("unknown grid preset '" + preset + "'");
}

std::optional<Split> parse_split_flag(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_split(s);
}

void check_format(const std::string& f, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (f == a) return;
  }
  throw UsageError("unsupported --format " + f);
}

std::string model_file_name(const TrainedModel& m) {
  return m.situation() + "_" + std::string(to_string(m.method)) + ".json";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Situation-aware exposure ratings for visual user profiles"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Worker threads (0 = available parallelism)")->capture_default_str();
  app.add_option("--format", common.format, "Output format: json, csv or md")->capture_default_str();

  RunManifest manifest;
  manifest.argv.assign(argv, argv + argc);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic rated dataset");
  std::string synth_config, synth_out;
  synth->add_option("--config", synth_config, "Generator config JSON");
  synth->add_option("--out", synth_out, "Output dataset directory");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate per-object thresholds and select detectors");
  std::string cal_situation, cal_dataset, cal_tables, cal_out, cal_split = "TRAIN";
  bool cal_rank = false;
  std::size_t cal_support = 3;
  calibrate->add_option("--situation", cal_situation, "Situation code")->required();
  calibrate->add_option("--dataset", cal_dataset, "Dataset directory")->required();
  calibrate->add_option("--situations", cal_tables, "Directory holding situations/<CODE>.json");
  calibrate->add_option("--out", cal_out, "Output JSON file (stdout when omitted)");
  calibrate->add_option("--split", cal_split, "TRAIN, VALIDATION or all");
  calibrate->add_flag("--rank", cal_rank, "Correlate ranks instead of values");
  calibrate->add_option("--min-support", cal_support, "Minimum covered profiles per candidate");

  // train
  auto* train = app.add_subcommand("train", "Grid-search and train rating methods");
  std::string tr_dataset, tr_tables, tr_situation, tr_variant = "lervup-fr", tr_grid, tr_preset = "full", tr_out;
  bool tr_trace_variance = false;
  train->add_option("--dataset", tr_dataset, "Dataset directory")->required();
  train->add_option("--situations", tr_tables, "Directory holding situations/<CODE>.json");
  train->add_option("--situation", tr_situation, "Situation code(s), comma separated, or all");
  train->add_option("--variant", tr_variant, "Method name or all");
  train->add_option("--grid", tr_grid, "Grid JSON");
  train->add_option("--grid-preset", tr_preset, "full or quick when --grid is absent");
  train->add_option("--out", tr_out, "Model output directory");
  train->add_flag("--trace-variance", tr_trace_variance, "Use the summed variance in user descriptors");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Correlation report, methods x situations");
  std::string ev_dataset, ev_tables, ev_models, ev_methods = "all", ev_situation, ev_grid, ev_preset = "quick", ev_out,
                                                  ev_split = "VALIDATION";
  evaluate->add_option("--dataset", ev_dataset, "Dataset directory")->required();
  evaluate->add_option("--situations", ev_tables, "Directory holding situations/<CODE>.json");
  evaluate->add_option("--models", ev_models, "Trained model directory (trains on the fly when omitted)");
  evaluate->add_option("--methods", ev_methods, "Methods, comma separated, or all");
  evaluate->add_option("--situation", ev_situation, "Situation code(s) or all");
  evaluate->add_option("--grid", ev_grid, "Grid JSON for on-the-fly training");
  evaluate->add_option("--grid-preset", ev_preset, "full or quick when --grid is absent");
  evaluate->add_option("--split", ev_split, "TRAIN, VALIDATION or all");
  evaluate->add_option("--out", ev_out, "Report file (stdout when omitted)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Retrain on half of the users or objects");
  std::string ab_dataset, ab_tables, ab_mode = "users50", ab_seeds = "1..5", ab_variant = "lervup-fr", ab_situation,
                                     ab_grid, ab_preset = "quick", ab_out;
  ablate->add_option("--dataset", ab_dataset, "Dataset directory")->required();
  ablate->add_option("--situations", ab_tables, "Directory holding situations/<CODE>.json");
  ablate->add_option("--mode", ab_mode, "full, users50 or objects50");
  ablate->add_option("--seeds", ab_seeds, "Seed list, e.g. 1..5 or 1,3,7");
  ablate->add_option("--variant", ab_variant, "Method name");
  ablate->add_option("--situation", ab_situation, "Situation code(s) or all");
  ablate->add_option("--grid", ab_grid, "Grid JSON");
  ablate->add_option("--grid-preset", ab_preset, "full or quick when --grid is absent");
  ablate->add_option("--out", ab_out, "Report file (stdout when omitted)");

  // rate
  auto* rate = app.add_subcommand("rate", "Rate one profile");
  std::string rt_model, rt_models, rt_profile, rt_out;
  rate->add_option("--model", rt_model, "Model artifact");
  rate->add_option("--models", rt_models, "Directory of model artifacts (default method per situation)");
  rate->add_option("--profile", rt_profile, "Profile detections JSON")->required();
  rate->add_option("--out", rt_out, "Output file (stdout when omitted)");

  // patterns
  auto* patterns = app.add_subcommand("patterns", "Cluster rating rows into patterns");
  std::string pt_input, pt_k = "2..10", pt_mode = "maximize", pt_out;
  patterns->add_option("--input", pt_input, "CSV: id,<situation>... or manual ratings")->required();
  patterns->add_option("--k", pt_k, "Candidate k range, e.g. 2..60");
  patterns->add_option("--mode", pt_mode, "maximize or minimize the mean silhouette");
  patterns->add_option("--out", pt_out, "Output file (stdout when omitted)");

  // agreement
  auto* agreement = app.add_subcommand("agreement", "Average deviation index of rater agreement");
  std::string ag_input, ag_out;
  agreement->add_option("--input", ag_input, "Manual ratings CSV")->required();
  agreement->add_option("--out", ag_out, "Output file (stdout when omitted)");

  // reference
  auto* reference = app.add_subcommand("reference", "Build a synthetic reference community");
  std::string rf_models, rf_out;
  std::size_t rf_size = 1000, rf_photos = 100;
  reference->add_option("--models", rf_models, "Model directory")->required();
  reference->add_option("--size", rf_size, "Profiles per situation (>= 100)");
  reference->add_option("--photos", rf_photos, "Photos per synthetic profile");
  reference->add_option("--out", rf_out, "Output JSON");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string sv_models, sv_reference, sv_host = "127.0.0.1", sv_cors = "*";
  int sv_port = 8080;
  std::size_t sv_ref_size = 500;
  serve->add_option("--models", sv_models, "Model directory")->required();
  serve->add_option("--reference", sv_reference, "Reference community JSON (synthetic one built when omitted)");
  serve->add_option("--reference-size", sv_ref_size, "Size of the fallback reference community");
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port (0 picks a free one)");
  serve->add_option("--cors-origin", sv_cors, "Allowed CORS origin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"detail", e.what()}}.dump() << '\n';
    return 2;
  }

  manifest.seed = common.seed;
  set_default_jobs(common.jobs);

  try {
    if (*synth) {
      manifest.command = "synth";
      SynthConfig config;
      if (!synth_config.empty()) {
        config = SynthConfig::from_json(read_json(synth_config));
        manifest.configs["synth"] = synth_config;
      }
      if (app.get_option("--seed")->count() > 0) config.seed = common.seed;
      manifest.seed = config.seed;
      const auto dir = output_dir(synth_out);
      const auto out = generate(config);
      save_dataset(dir, out.dataset);
      save_situation_models(dir, out.models);
      write_text_atomic(dir / "ground_truth.csv", ground_truth_csv(out.truth));
      write_text_atomic(dir / "synth_config.json", dump(config.to_json()));
      manifest.dataset_hash = dataset_hash(out.dataset);
      manifest.outputs = {dir.string()};
      manifest.write(dir / "manifest.json");
      std::cout << json{{"dataset", dir.string()},
                        {"dataset_hash", manifest.dataset_hash},
                        {"profiles", out.dataset.profiles.size()}}.dump()
                << '\n';
    } else if (*calibrate) {
      manifest.command = "calibrate";
      const auto dataset = load_dataset(cal_dataset);
      const auto tables = situation_tables(cal_dataset, cal_tables);
      auto it = tables.find(cal_situation);
      if (it == tables.end()) throw ValidationError("no situation table for " + cal_situation);
      CalibrationOptions opts;
      opts.split = parse_split_flag(cal_split);
      opts.rank_transform = cal_rank;
      opts.min_support = cal_support;
      opts.jobs = common.jobs;
      const auto table = calibrate_and_select(dataset, it->second, opts);
      auto j = to_json(table);
      const auto sel = selection_of(table);
      j["active_objects"] = std::vector<std::string>(sel.active_objects.begin(), sel.active_objects.end());
      manifest.dataset_hash = dataset_hash(dataset);
      emit(dump(j), cal_out, &manifest);
      if (!cal_out.empty()) manifest.write(fs::path(cal_out).string() + ".manifest.json");
    } else if (*train) {
      manifest.command = "train";
      const auto dir = output_dir(tr_out);
      const auto dataset = load_dataset(tr_dataset);
      const auto tables = situation_tables(tr_dataset, tr_tables);
      const auto grid = load_grid(tr_grid, tr_preset);
      if (!tr_grid.empty()) manifest.configs["grid"] = tr_grid;
      TrainOptions opts;
      opts.seed = common.seed;
      opts.jobs = common.jobs;
      opts.dataset_hash = dataset_hash(dataset);
      opts.variance_mode = tr_trace_variance ? VarianceMode::Trace : VarianceMode::MeanOfAttributes;
      manifest.dataset_hash = opts.dataset_hash;
      fs::create_directories(dir);
      json summary = json::array();
      for (const auto& code : chosen_situations(tr_situation, tables)) {
        for (Method m : parse_methods(tr_variant)) {
          const auto result = grid_search_train(dataset, tables.at(code), m, grid, opts);
          const auto file = dir / model_file_name(result.model);
          const auto trace = dir / (code + "_" + std::string(to_string(m)) + "_trace.csv");
          write_text_atomic(file, dump(result.model.to_json()));
          write_text_atomic(trace, trace_to_csv(result.trace));
          manifest.outputs.push_back(file.string());
          manifest.outputs.push_back(trace.string());
          summary.push_back({{"situation", code},
                             {"method", std::string(to_string(m))},
                             {"validation_pearson", result.model.validation_pearson
                                                        ? json(*result.model.validation_pearson)
                                                        : json(nullptr)},
                             {"model", file.string()}});
        }
      }
      manifest.write(dir / "manifest.json");
      std::cout << summary.dump(2) << '\n';
    } else if (*evaluate) {
      manifest.command = "evaluate";
      check_format(common.format, {"json", "csv", "md"});
      const auto dataset = load_dataset(ev_dataset);
      manifest.dataset_hash = dataset_hash(dataset);
      const auto methods = parse_methods(ev_methods);
      const std::set<Method> wanted(methods.begin(), methods.end());
      std::vector<TrainedModel> models;
      if (!ev_models.empty()) {
        std::set<std::string> sits;
        if (!ev_situation.empty() && ev_situation != "all") {
          std::stringstream ss(ev_situation);
          std::string part;
          while (std::getline(ss, part, ',')) sits.insert(part);
        }
        for (auto& m : load_models(ev_models)) {
          if (wanted.count(m.method) && (sits.empty() || sits.count(m.situation()))) models.push_back(std::move(m));
        }
      } else {
        const auto tables = situation_tables(ev_dataset, ev_tables);
        const auto grid = load_grid(ev_grid, ev_preset);
        if (!ev_grid.empty()) manifest.configs["grid"] = ev_grid;
        TrainOptions opts;
        opts.seed = common.seed;
        opts.jobs = common.jobs;
        opts.dataset_hash = manifest.dataset_hash;
        for (const auto& code : chosen_situations(ev_situation, tables)) {
          for (Method m : methods) models.push_back(grid_search_train(dataset, tables.at(code), m, grid, opts).model);
        }
      }
      const auto report = evaluate_models(models, dataset, parse_split_flag(ev_split));
      const std::string text = common.format == "md"    ? report.to_markdown()
                               : common.format == "csv" ? report.to_csv()
                                                        : dump(report.to_json());
      emit(text, ev_out, &manifest);
      if (!ev_out.empty()) manifest.write(ev_out + ".manifest.json");
    } else if (*ablate) {
      manifest.command = "ablate";
      check_format(common.format, {"json", "csv", "md"});
      const auto dataset = load_dataset(ab_dataset);
      manifest.dataset_hash = dataset_hash(dataset);
      const auto tables = situation_tables(ab_dataset, ab_tables);
      const auto grid = load_grid(ab_grid, ab_preset);
      const auto mode = parse_ablation_mode(ab_mode);
      const auto seeds = parse_seeds(ab_seeds);
      const auto method = parse_method(ab_variant);
      TrainOptions opts;
      opts.jobs = common.jobs;
      opts.dataset_hash = manifest.dataset_hash;
      std::vector<AblationReport> reports;
      for (const auto& code : chosen_situations(ab_situation, tables)) {
        reports.push_back(run_ablation(dataset, tables.at(code), method, mode, seeds, grid, opts));
      }
      std::string text;
      if (common.format == "md") {
        text = ablation_to_markdown(reports);
      } else if (common.format == "csv") {
        text = ablation_to_csv(reports);
      } else {
        json j = json::array();
        for (const auto& r : reports) j.push_back(r.to_json());
        text = dump(j);
      }
      emit(text, ab_out, &manifest);
      if (!ab_out.empty()) manifest.write(ab_out + ".manifest.json");
    } else if (*rate) {
      if (rt_model.empty() == rt_models.empty()) throw UsageError("give exactly one of --model or --models");
      const auto profile = profile_from_json(read_json(rt_profile));
      validate(profile);
      std::vector<TrainedModel> models;
      if (!rt_model.empty()) {
        models.push_back(TrainedModel::from_json(read_json(rt_model)));
      } else {
        const auto all = load_models(rt_models);
        std::set<std::string> codes;
        for (const auto& m : all) codes.insert(m.situation());
        for (const auto& c : codes) models.push_back(*default_model(all, c));
      }
      json results = json::array();
      for (const auto& model : models) {
        const auto rating = predict(model, profile);
        const auto eligible = eligible_photos(model, profile);
        const double coverage = (!rating || profile.photos.empty())
                                    ? 0.0
                                    : static_cast<double>(eligible.size()) / static_cast<double>(profile.photos.size());
        json photos = json::array();
        const auto ratings = model.effective_ratings();
        const auto table = model.effective_thresholds();
        for (const auto& photo : profile.photos) {
          const auto d = image_descriptor(photo, ratings, table);
          photos.push_back({{"photo_id", photo.photo_id},
                            {"impact", d ? json(d->impact()) : json(nullptr)},
                            {"no_signal", !d.has_value()}});
        }
        json entry = {{"situation", model.situation()},
                      {"method", std::string(to_string(model.method))},
                      {"rating", rating ? json(*rating) : json(nullptr)},
                      {"coverage", rating ? json(coverage) : json(0)},
                      {"photos", photos},
                      {"model_hash", model.provenance_hash()}};
        if (rating) entry["band"] = std::string(to_string(band_for(*rating)));
        results.push_back(entry);
      }
      const json out = models.size() == 1 ? results.front()
                                          : json{{"user_id", profile.user_id}, {"situations", results}};
      emit(dump(out), rt_out);
    } else if (*patterns) {
      check_format(common.format, {"json", "csv", "md"});
      const auto [k_min, k_max] = parse_range(pt_k);
      if (pt_mode != "maximize" && pt_mode != "minimize") throw UsageError("--mode must be maximize or minimize");
      std::ifstream in(pt_input);
      if (!in) throw ValidationError("cannot open " + pt_input);
      std::string header;
      std::getline(in, header);
      std::vector<std::string> ids;
      std::vector<Point> rows;
      std::vector<std::string> columns;
      if (header.rfind("user_id,situation,rater_id,rating", 0) == 0) {
        in.seekg(0);
        const auto manual = read_manual_csv(in);
        std::map<std::string, std::map<std::string, std::vector<int>>> grouped;
        std::set<std::string> sits;
        for (const auto& m : manual) {
          auto& v = grouped[m.user_id][m.situation];
          v.insert(v.end(), m.rater_ratings.begin(), m.rater_ratings.end());
          sits.insert(m.situation);
        }
        columns.assign(sits.begin(), sits.end());
        for (const auto& [user, per] : grouped) {
          if (per.size() != sits.size()) continue;
          Point row;
          for (const auto& s : columns) {
            double sum = 0.0;
            for (int r : per.at(s)) sum += r;
            row.push_back(sum / static_cast<double>(per.at(s).size()));
          }
          ids.push_back(user);
          rows.push_back(row);
        }
      } else {
        std::stringstream hs(header);
        std::string cell;
        std::getline(hs, cell, ',');
        while (std::getline(hs, cell, ',')) columns.push_back(cell);
        std::string line;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
          ++line_no;
          if (line.empty()) continue;
          std::stringstream ls(line);
          std::getline(ls, cell, ',');
          ids.push_back(cell);
          Point row;
          while (std::getline(ls, cell, ',')) {
            try {
              row.push_back(std::stod(cell));
            } catch (const std::exception&) {
              throw ValidationError("non-numeric value on line " + std::to_string(line_no));
            }
          }
          if (row.size() != columns.size()) throw ValidationError("wrong column count on line " + std::to_string(line_no));
          rows.push_back(row);
        }
      }
      const auto result = discover_patterns(rows, static_cast<int>(k_min), static_cast<int>(k_max), common.seed,
                                            pt_mode == "minimize" ? SilhouetteMode::Minimize : SilhouetteMode::Maximize);
      std::vector<std::size_t> sizes(result.centroids.size(), 0);
      for (int a : result.assignments) ++sizes[static_cast<std::size_t>(a)];
      std::string text;
      if (common.format == "json") {
        json pats = json::array();
        for (std::size_t c = 0; c < result.centroids.size(); ++c) {
          pats.push_back({{"pattern", c}, {"size", sizes[c]}, {"centroid", result.centroids[c]}});
        }
        json sil = json::object();
        for (const auto& [k, s] : result.silhouette_by_k) sil[std::to_string(k)] = s;
        text = dump({{"k", result.k}, {"silhouette", result.silhouette}, {"columns", columns},
                     {"patterns", pats}, {"silhouette_by_k", sil}});
      } else {
        std::ostringstream o;
        const bool md = common.format == "md";
        o << (md ? "| pattern | size |" : "pattern,size");
        for (const auto& c : columns) o << (md ? " " : ",") << c << (md ? " |" : "");
        o << '\n';
        if (md) {
          o << "|---|---|";
          for (std::size_t i = 0; i < columns.size(); ++i) o << "---|";
          o << '\n';
        }
        for (std::size_t c = 0; c < result.centroids.size(); ++c) {
          o << (md ? "| " : "") << c << (md ? " | " : ",") << sizes[c] << (md ? " |" : "");
          for (double v : result.centroids[c]) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3f", v);
            o << (md ? " " : ",") << buf << (md ? " |" : "");
          }
          o << '\n';
        }
        text = o.str();
      }
      emit(text, pt_out);
    } else if (*agreement) {
      check_format(common.format, {"json", "csv", "md"});
      std::ifstream in(ag_input);
      if (!in) throw ValidationError("cannot open " + ag_input);
      const auto report = agreement_report(read_manual_csv(in));
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      std::string text;
      if (common.format == "json") {
        text = dump(report.to_json());
      } else {
        std::ostringstream o;
        const bool md = common.format == "md";
        o << (md ? "| user_id | situation | AD |\n|---|---|---|\n" : "user_id,situation,ad\n");
        for (std::size_t i = 0; i < report.items.size(); ++i) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.4f", report.index.per_item[i]);
          if (md) {
            o << "| " << report.items[i].first << " | " << report.items[i].second << " | " << buf << " |\n";
          } else {
            o << report.items[i].first << ',' << report.items[i].second << ',' << buf << '\n';
          }
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", report.index.mean);
        if (md) o << "\nMean AD " << buf << (report.acceptable ? " (acceptable)\n" : " (above 1.2)\n");
        text = o.str();
      }
      emit(text, ag_out);
    } else if (*reference) {
      manifest.command = "reference";
      const auto models = load_models(rf_models);
      const auto rc = build_reference_community(models, rf_size, common.seed, rf_photos);
      emit(dump(rc.to_json()), rf_out, &manifest);
      if (!rf_out.empty()) manifest.write(rf_out + ".manifest.json");
    } else if (*serve) {
      auto models = load_models(sv_models);
      auto rc = sv_reference.empty() ? build_reference_community(models, sv_ref_size, common.seed)
                                     : ReferenceCommunity::from_json(read_json(sv_reference));
      ServiceOptions opts;
      opts.cors_origin = sv_cors;
      Service service(std::move(models), std::move(rc), opts);
      HttpServer server(service);
      const int port = server.bind(sv_host, sv_port);
      if (port <= 0) throw ValidationError("cannot bind " + sv_host);
      std::cerr << "listening on http://" << sv_host << ':' << port << '\n';
      server.run();
    }
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "usage"}, {"detail", e.what()}}.dump() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << json{{"error", "validation"}, {"detail", e.what()}}.dump() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << json{{"error", "validation"}, {"detail", e.what()}}.dump() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << json{{"error", "validation"}, {"detail", e.what()}}.dump() << '\n';
    return 3;
  } catch (const DegenerateError& e) {
    std::cerr << json{{"error", "degenerate"}, {"detail", e.what()}}.dump() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"detail", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
