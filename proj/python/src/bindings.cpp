// Python bindings. Structured values cross the boundary as JSON text; the
// package wrapper turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "exposure/analysis.hpp"
#include "exposure/calibration.hpp"
#include "exposure/core.hpp"
#include "exposure/errors.hpp"
#include "exposure/io.hpp"
#include "exposure/learning.hpp"
#include "exposure/service.hpp"
#include "exposure/stats.hpp"
#include "exposure/synth.hpp"

namespace py = pybind11;
using namespace exposure;

namespace {

std::map<std::string, SituationModel> tables(const std::string& dataset_dir, const std::optional<std::string>& dir) {
  return load_situation_models(dir ? *dir : dataset_dir);
}

GridSpec grid_from(const std::optional<std::string>& grid_json, const std::string& preset) {
  if (grid_json) return GridSpec::from_json(json::parse(*grid_json));
  if (preset == "quick") return GridSpec::quick();
  if (preset == "full") return GridSpec{};
  throw ValidationError("grid preset must be quick or full");
}

std::string synth(const std::string& config_json, const std::string& out_dir) {
  const auto config = SynthConfig::from_json(json::parse(config_json));
  const auto out = generate(config);
  save_dataset(out_dir, out.dataset);
  save_situation_models(out_dir, out.models);
  write_text_atomic(std::filesystem::path(out_dir) / "ground_truth.csv", ground_truth_csv(out.truth));
  write_text_atomic(std::filesystem::path(out_dir) / "synth_config.json", dump(config.to_json()));
  return dataset_hash(out.dataset);
}

std::string calibrate(const std::string& dataset_dir, const std::string& situation,
                      const std::optional<std::string>& situations_dir) {
  const auto dataset = load_dataset(dataset_dir);
  const auto models = tables(dataset_dir, situations_dir);
  auto it = models.find(situation);
  if (it == models.end()) throw ValidationError("no rating table for situation " + situation);
  const auto table = calibrate_and_select(dataset, it->second);
  auto j = to_json(table);
  const auto sel = selection_of(table);
  j["active_objects"] = std::vector<std::string>(sel.active_objects.begin(), sel.active_objects.end());
  return j.dump();
}

std::string train(const std::string& dataset_dir, const std::string& situation, const std::string& method,
                  const std::optional<std::string>& grid_json, const std::string& preset, std::uint64_t seed,
                  const std::optional<std::string>& situations_dir) {
  const auto dataset = load_dataset(dataset_dir);
  const auto models = tables(dataset_dir, situations_dir);
  auto it = models.find(situation);
  if (it == models.end()) throw ValidationError("no rating table for situation " + situation);
  TrainOptions options;
  options.seed = seed;
  options.dataset_hash = dataset_hash(dataset);
  const auto result = grid_search_train(dataset, it->second, parse_method(method), grid_from(grid_json, preset), options);
  return result.model.to_json().dump();
}

std::string evaluate(const std::string& dataset_dir, const std::vector<std::string>& model_jsons,
                     const std::string& split) {
  const auto dataset = load_dataset(dataset_dir);
  std::vector<TrainedModel> models;
  for (const auto& m : model_jsons) models.push_back(TrainedModel::from_json(json::parse(m)));
  std::optional<Split> s;
  if (split != "all") s = parse_split(split);
  return evaluate_models(models, dataset, s).to_json().dump();
}

std::optional<double> rate(const std::string& model_json, const std::string& profile_json) {
  const auto model = TrainedModel::from_json(json::parse(model_json));
  const auto profile = profile_from_json(json::parse(profile_json));
  validate(profile);
  return predict(model, profile);
}

py::tuple ad(const std::vector<std::vector<int>>& items) {
  const auto r = ad_index(items);
  return py::make_tuple(r.per_item, r.mean);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Profile exposure rating core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DegenerateError>(m, "DegenerateError", PyExc_ArithmeticError);

  m.def("focal_rating", &focal_rating, py::arg("rating"), py::arg("k_param"), py::arg("gamma"));
  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });
  m.def("cohen_band", [](double r) { return std::string(to_string(cohen_band(r))); });
  m.def("ad_index", &ad, "Per-item and mean average deviation");
  m.def("band", [](double rating) { return std::string(to_string(band_for(rating))); });
  m.def("synth", &synth, py::arg("config_json"), py::arg("out_dir"));
  m.def("calibrate", &calibrate, py::arg("dataset_dir"), py::arg("situation"),
        py::arg("situations_dir") = std::nullopt);
  m.def("train", &train, py::arg("dataset_dir"), py::arg("situation"), py::arg("method"),
        py::arg("grid_json") = std::nullopt, py::arg("preset") = "quick", py::arg("seed") = 0,
        py::arg("situations_dir") = std::nullopt, py::call_guard<py::gil_scoped_release>());
  m.def("evaluate", &evaluate, py::arg("dataset_dir"), py::arg("models"), py::arg("split") = "VALIDATION");
  m.def("rate", &rate, py::arg("model_json"), py::arg("profile_json"));
}
