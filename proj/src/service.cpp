#include "exposure/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>

#include <httplib.h>

#include "exposure/descriptors.hpp"
#include "exposure/errors.hpp"
#include "exposure/io.hpp"
#include "exposure/rng.hpp"
#include "exposure/stats.hpp"

namespace exposure {

namespace {

const std::vector<Method>& method_preference() {
  static const std::vector<Method> kOrder = {Method::LervupFocal, Method::Lervup, Method::BaseEtaFocal,
                                             Method::BaseEta,     Method::Base,   Method::RegPca,
                                             Method::RegRaw};
  return kOrder;
}

nlohmann::json nullable(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string format_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, n);
  return buf;
}

double round4(double x) { return std::round(x * 1e4) / 1e4; }

}  // namespace

std::string_view to_string(Band band) {
  switch (band) {
    case Band::Red: return "red";
    case Band::Orange: return "orange";
    case Band::Yellow: return "yellow";
    case Band::LightGreen: return "light-green";
    case Band::Green: return "green";
  }
  return "yellow";
}

Band band_for(double rating, const BandThresholds& t) {
  if (rating < t.red_below) return Band::Red;
  if (rating < t.orange_below) return Band::Orange;
  if (rating <= t.yellow_up_to) return Band::Yellow;
  if (rating <= t.light_green_up_to) return Band::LightGreen;
  return Band::Green;
}

// ---------------------------------------------------------------------------
// Reference community

void ReferenceCommunity::validate() const {
  for (const auto& [code, entry] : situations) {
    if (entry.ratings.size() < kMinReferenceSize) {
      throw ValidationError("reference community for " + code + " has fewer than 100 ratings");
    }
    if (!std::is_sorted(entry.ratings.begin(), entry.ratings.end())) {
      throw ValidationError("reference ratings for " + code + " are not sorted");
    }
  }
}

std::optional<double> ReferenceCommunity::percentile(const std::string& situation, double rating) const {
  auto it = situations.find(situation);
  if (it == situations.end() || it->second.ratings.empty()) return std::nullopt;
  const auto& r = it->second.ratings;
  const auto at_most = std::upper_bound(r.begin(), r.end(), rating) - r.begin();
  return static_cast<double>(at_most) / static_cast<double>(r.size());
}

nlohmann::json ReferenceCommunity::to_json() const {
  nlohmann::json sit = nlohmann::json::object();
  for (const auto& [code, e] : situations) {
    sit[code] = {{"method", e.method}, {"model_hash", e.model_hash}, {"ratings", e.ratings}};
  }
  return {{"seed", seed}, {"situations", sit}};
}

ReferenceCommunity ReferenceCommunity::from_json(const nlohmann::json& j) {
  ReferenceCommunity rc;
  try {
    rc.seed = j.value("seed", std::uint64_t{0});
    for (const auto& [code, e] : j.at("situations").items()) {
      rc.situations[code] = Entry{e.value("method", ""), e.value("model_hash", ""),
                                  e.at("ratings").get<std::vector<double>>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("reference community: ") + e.what());
  }
  rc.validate();
  return rc;
}

std::vector<ProfileDetections> reference_profiles(const SituationModel& objects, std::size_t count,
                                                  std::uint64_t seed, std::size_t photos_per_profile) {
  std::vector<std::string> ids;
  std::vector<double> ratings;
  for (const auto& [id, r] : objects.ratings()) {
    ids.push_back(id);
    ratings.push_back(r);
  }
  const double spread = std::max(rating_table_stats(objects).stddev, 0.1);
  std::vector<ProfileDetections> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    const double taste = rng.normal();
    std::vector<double> cumulative(ids.size());
    double total = 0.0;
    for (std::size_t o = 0; o < ids.size(); ++o) {
      total += std::exp(0.8 * taste * ratings[o] / spread);
      cumulative[o] = total;
    }
    ProfileDetections profile{format_id("ref", i), {}};
    for (std::size_t j = 0; j < photos_per_profile; ++j) {
      PhotoDetections photo{profile.user_id + "_p" + std::to_string(j), {}};
      const std::size_t n = std::min<std::size_t>(rng.poisson(1.5), 6);
      for (std::size_t k = 0; k < n; ++k) {
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), rng.uniform() * total);
        if (it == cumulative.end()) --it;
        const double conf = std::clamp(round4(rng.beta(6.0, 2.0)), 1e-4, 1.0);
        photo.detections.push_back({ids[static_cast<std::size_t>(it - cumulative.begin())], conf, std::nullopt});
      }
      const std::size_t spurious = rng.poisson(0.2);
      for (std::size_t k = 0; k < spurious; ++k) {
        const double conf = std::clamp(round4(rng.beta(2.0, 5.0)), 1e-4, 1.0);
        photo.detections.push_back({ids[rng.below(ids.size())], conf, std::nullopt});
      }
      profile.photos.push_back(std::move(photo));
    }
    out.push_back(std::move(profile));
  }
  return out;
}

const TrainedModel* default_model(const std::vector<TrainedModel>& models, const std::string& situation) {
  for (Method m : method_preference()) {
    for (const auto& model : models) {
      if (model.situation() == situation && model.method == m) return &model;
    }
  }
  return nullptr;
}

ReferenceCommunity build_reference_community(const std::vector<TrainedModel>& models, std::size_t size,
                                             std::uint64_t seed, std::size_t photos_per_profile) {
  ReferenceCommunity rc;
  rc.seed = seed;
  std::set<std::string> codes;
  for (const auto& m : models) codes.insert(m.situation());
  for (const auto& code : codes) {
    const auto* model = default_model(models, code);
    const auto profiles = reference_profiles(model->model, size, derive_seed(seed, fnv1a64(code)), photos_per_profile);
    ReferenceCommunity::Entry entry{std::string(to_string(model->method)), model->provenance_hash(), {}};
    for (const auto& p : profiles) {
      if (auto r = predict(*model, p)) entry.ratings.push_back(*r);
    }
    if (entry.ratings.size() < kMinReferenceSize) {
      throw DegenerateError("reference community for " + code + " has fewer than 100 rated profiles");
    }
    std::sort(entry.ratings.begin(), entry.ratings.end());
    rc.situations[code] = std::move(entry);
  }
  return rc;
}

std::vector<TrainedModel> load_models(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("model directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TrainedModel> models;
  std::set<std::pair<std::string, Method>> seen;
  for (const auto& f : files) {
    const auto j = read_json(f);
    if (!j.is_object() || j.value("format", "") != "exposure-model") continue;
    auto m = TrainedModel::from_json(j);
    if (!seen.insert({m.situation(), m.method}).second) {
      throw ValidationError("two models for " + m.situation() + "/" + std::string(to_string(m.method)));
    }
    models.push_back(std::move(m));
  }
  std::sort(models.begin(), models.end(), [](const TrainedModel& a, const TrainedModel& b) {
    if (a.situation() != b.situation()) return a.situation() < b.situation();
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  });
  return models;
}

// ---------------------------------------------------------------------------
// Service

ServiceResponse error_response(int status, const std::string& code, const std::string& detail) {
  return {status, {{"error", code}, {"detail", detail}}, ""};
}

Service::Service(std::vector<TrainedModel> models, ReferenceCommunity reference, ServiceOptions options)
    : models_(std::move(models)), reference_(std::move(reference)), options_(std::move(options)) {
  if (models_.empty()) throw ValidationError("service needs at least one model");
  std::string all;
  for (const auto& m : models_) {
    model_hashes_.push_back(m.provenance_hash());
    all += model_hashes_.back();
  }
  models_hash_ = hex64(fnv1a64(all));
}

std::optional<ProfileDetections> Service::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = profiles_.find(id);
  if (it == profiles_.end()) return std::nullopt;
  return it->second;
}

Service::Resolved Service::resolve(const std::string& situation, const std::optional<std::string>& method) const {
  if (situation.empty()) return {nullptr, error_response(400, "missing_parameter", "situation is required")};
  if (!method) {
    const auto* m = default_model(models_, situation);
    if (!m) return {nullptr, error_response(409, "no_model", "no model for situation " + situation)};
    return {m, std::nullopt};
  }
  Method wanted;
  try {
    wanted = parse_method(*method);
  } catch (const ValidationError& e) {
    return {nullptr, error_response(400, "invalid_method", e.what())};
  }
  for (const auto& m : models_) {
    if (m.situation() == situation && m.method == wanted) return {&m, std::nullopt};
  }
  return {nullptr, error_response(409, "no_model",
                                  "no " + std::string(to_string(wanted)) + " model for situation " + situation)};
}

nlohmann::json Service::rate(const TrainedModel& model, const ProfileDetections& profile) const {
  const auto rating = predict(model, profile);
  const auto eligible = eligible_photos(model, profile);
  const double coverage =
      profile.photos.empty() ? 0.0 : static_cast<double>(eligible.size()) / static_cast<double>(profile.photos.size());
  const auto idx = static_cast<std::size_t>(&model - models_.data());
  nlohmann::json out = {{"situation", model.situation()},
                        {"method", std::string(to_string(model.method))},
                        {"rating", nullable(rating)},
                        {"band", nullptr},
                        {"percentile", nullptr},
                        {"coverage", rating ? nlohmann::json(coverage) : nlohmann::json(0)},
                        {"photos_rated", rating ? eligible.size() : 0},
                        {"photos_total", profile.photos.size()},
                        {"model_hash", model_hashes_[idx]}};
  if (rating) {
    out["band"] = std::string(to_string(band_for(*rating, options_.bands)));
    out["percentile"] = nullable(reference_.percentile(model.situation(), *rating));
  }
  return out;
}

ServiceResponse Service::create_profile(const std::string& body) {
  ProfileDetections profile;
  try {
    profile = profile_from_json(nlohmann::json::parse(body));
    validate(profile);
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "invalid_json", e.what());
  } catch (const ValidationError& e) {
    return error_response(400, "invalid_profile", e.what());
  }
  std::unique_lock lock(mutex_);
  const auto id = format_id("p", next_id_++);
  const auto photos = profile.photos.size();
  const auto user = profile.user_id;
  profiles_.emplace(id, std::move(profile));
  return {201, {{"profile_id", id}, {"user_id", user}, {"photos", photos}}, ""};
}

ServiceResponse Service::get_profile(const std::string& id) const {
  const auto profile = find(id);
  if (!profile) return error_response(404, "not_found", "unknown profile " + id);
  nlohmann::json body = {{"profile_id", id}, {"profile", to_json(*profile)}};
  return {200, body, hex64(fnv1a64(body.dump()))};
}

ServiceResponse Service::rating(const std::string& id, const std::string& situation,
                                const std::optional<std::string>& method) const {
  const auto profile = find(id);
  if (!profile) return error_response(404, "not_found", "unknown profile " + id);
  const auto r = resolve(situation, method);
  if (r.error) return *r.error;
  auto body = rate(*r.model, *profile);
  body["profile_id"] = id;
  return {200, body, hex64(fnv1a64(body.dump()))};
}

ServiceResponse Service::photos(const std::string& id, const std::string& situation,
                                const std::optional<std::string>& method) const {
  const auto profile = find(id);
  if (!profile) return error_response(404, "not_found", "unknown profile " + id);
  const auto r = resolve(situation, method);
  if (r.error) return *r.error;
  const auto& model = *r.model;
  const auto ratings = model.effective_ratings();
  const auto table = model.effective_thresholds();
  const auto selection = selection_of(table);

  nlohmann::json signal = nlohmann::json::array();
  nlohmann::json silent = nlohmann::json::array();
  std::vector<std::pair<double, nlohmann::json>> ranked;
  for (const auto& photo : profile->photos) {
    const auto d = image_descriptor(photo, ratings, table);
    bool activated = false;
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& det : photo.detections) {
      const bool valid = det.confidence >= table.eta_for(det.object_id);
      const bool active = valid && ratings.contains(det.object_id) && selection.is_active(det.object_id);
      activated = activated || active;
      nlohmann::json per_situation = nlohmann::json::object();
      for (const auto& m : models_) {
        per_situation[m.situation()] = nullable(m.model.rating(det.object_id));
      }
      boxes.push_back({{"object", det.object_id},
                       {"confidence", det.confidence},
                       {"bbox", det.bbox ? nlohmann::json{det.bbox->x, det.bbox->y, det.bbox->width, det.bbox->height}
                                         : nlohmann::json(nullptr)},
                       {"valid", valid},
                       {"active", active},
                       {"ratings", per_situation}});
    }
    nlohmann::json entry = {{"photo_id", photo.photo_id}, {"no_signal", !d.has_value()}, {"boxes", boxes}};
    entry["contribution"] =
        activated ? nlohmann::json(photo_contribution(photo, ratings, table, selection)) : nlohmann::json(nullptr);
    if (d) {
      entry["impact"] = d->impact();
      entry["band"] = std::string(to_string(band_for(d->impact(), options_.bands)));
      entry["descriptor"] = {{"positive", d->positive}, {"negative", d->negative}, {"confidence", d->confidence}};
      ranked.emplace_back(d->impact(), std::move(entry));
    } else {
      entry["impact"] = nullptr;
      entry["band"] = nullptr;
      entry["descriptor"] = nullptr;
      silent.push_back(std::move(entry));
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second.at("photo_id").template get<std::string>() < b.second.at("photo_id").template get<std::string>();
  });
  for (auto& [impact, entry] : ranked) signal.push_back(std::move(entry));
  for (auto& entry : silent) signal.push_back(std::move(entry));
  const auto idx = static_cast<std::size_t>(&model - models_.data());
  nlohmann::json body = {{"profile_id", id},
                         {"situation", model.situation()},
                         {"method", std::string(to_string(model.method))},
                         {"model_hash", model_hashes_[idx]},
                         {"photos", signal}};
  return {200, body, hex64(fnv1a64(body.dump()))};
}

ServiceResponse Service::whatif(const std::string& id, const std::string& body,
                                const std::optional<std::string>& method) const {
  const auto profile = find(id);
  if (!profile) return error_response(404, "not_found", "unknown profile " + id);
  std::set<std::string> masked;
  std::optional<std::string> requested = method;
  try {
    const auto j = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
    if (!j.is_object()) return error_response(400, "invalid_request", "body must be a JSON object");
    if (j.contains("masked_photo_ids")) {
      for (const auto& p : j.at("masked_photo_ids")) masked.insert(p.get<std::string>());
    }
    if (j.contains("method") && !j.at("method").is_null()) requested = j.at("method").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "invalid_json", e.what());
  }
  std::set<std::string> known;
  for (const auto& p : profile->photos) known.insert(p.photo_id);
  for (const auto& m : masked) {
    if (!known.count(m)) return error_response(400, "unknown_photo", "photo " + m + " is not in profile " + id);
  }
  ProfileDetections visible{profile->user_id, {}};
  for (const auto& p : profile->photos) {
    if (!masked.count(p.photo_id)) visible.photos.push_back(p);
  }

  std::set<std::string> codes;
  for (const auto& m : models_) codes.insert(m.situation());
  nlohmann::json results = nlohmann::json::array();
  for (const auto& code : codes) {
    const auto r = resolve(code, requested);
    if (r.error) {
      if (r.error->status == 409) continue;
      return *r.error;
    }
    auto current = rate(*r.model, *profile);
    auto entry = rate(*r.model, visible);
    entry["current_rating"] = current["rating"];
    entry["delta"] = (current["rating"].is_null() || entry["rating"].is_null())
                         ? nlohmann::json(nullptr)
                         : nlohmann::json(entry["rating"].get<double>() - current["rating"].get<double>());
    results.push_back(std::move(entry));
  }
  if (results.empty()) return error_response(409, "no_model", "no model matches the requested method");
  nlohmann::json out = {{"profile_id", id},
                        {"masked_photo_ids", std::vector<std::string>(masked.begin(), masked.end())},
                        {"situations", results}};
  return {200, out, ""};
}

ServiceResponse Service::situations() const {
  std::map<std::string, std::vector<std::string>> methods;
  for (const auto& m : models_) methods[m.situation()].push_back(std::string(to_string(m.method)));
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [code, ms] : methods) {
    const auto* d = default_model(models_, code);
    list.push_back({{"code", code},
                    {"display_name", Situation::from_code(code).display_name},
                    {"methods", ms},
                    {"default_method", std::string(to_string(d->method))},
                    {"has_reference", reference_.situations.count(code) != 0}});
  }
  return {200, {{"situations", list}}, ""};
}

ServiceResponse Service::models() const {
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < models_.size(); ++i) {
    const auto& m = models_[i];
    list.push_back({{"situation", m.situation()},
                    {"method", std::string(to_string(m.method))},
                    {"model_hash", model_hashes_[i]},
                    {"dataset_hash", m.dataset_hash},
                    {"seed", m.seed},
                    {"validation_pearson", nullable(m.validation_pearson)},
                    {"objects", m.model.size()}});
  }
  return {200, {{"models", list}, {"models_hash", models_hash_}}, ""};
}

// ---------------------------------------------------------------------------
// HTTP

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  explicit Impl(Service& s) : service(s) {}
};

namespace {

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

void send(const httplib::Request& req, httplib::Response& res, const ServiceResponse& r) {
  if (!r.etag.empty()) {
    const std::string quoted = "\"" + r.etag + "\"";
    res.set_header("ETag", quoted);
    if (req.get_header_value("If-None-Match") == quoted) {
      res.status = 304;
      return;
    }
  }
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& s = impl_->server;
  auto& svc = impl_->service;
  s.set_default_headers({{"Access-Control-Allow-Origin", svc.options().cors_origin},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                         {"Access-Control-Allow-Headers", "Content-Type, If-None-Match"},
                         {"Access-Control-Expose-Headers", "ETag, X-Models-Hash"},
                         {"X-Models-Hash", svc.models_hash()}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
  s.Get("/situations", [&svc](const httplib::Request& req, httplib::Response& res) { send(req, res, svc.situations()); });
  s.Get("/models", [&svc](const httplib::Request& req, httplib::Response& res) { send(req, res, svc.models()); });
  s.Post("/profiles", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.create_profile(req.body));
  });
  s.Get(R"(/profiles/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.get_profile(req.matches[1]));
  });
  s.Get(R"(/profiles/([^/]+)/rating)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.rating(req.matches[1], param(req, "situation").value_or(""), param(req, "method")));
  });
  s.Get(R"(/profiles/([^/]+)/photos)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.photos(req.matches[1], param(req, "situation").value_or(""), param(req, "method")));
  });
  s.Post(R"(/profiles/([^/]+)/whatif)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.whatif(req.matches[1], req.body, param(req, "method")));
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", "internal"}, {"detail", detail}}.dump(), "application/json");
  });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "http_error";
    res.set_content(nlohmann::json{{"error", code}, {"detail", req.method + " " + req.path}}.dump(),
                    "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& s = impl_->server;
  if (port == 0) return s.bind_to_any_port(host);
  if (!s.bind_to_port(host, port)) throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
  thread_ = std::thread([this] { run(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace exposure
