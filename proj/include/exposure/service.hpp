#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "exposure/core.hpp"
#include "exposure/learning.hpp"

namespace exposure {

enum class Band { Red, Orange, Yellow, LightGreen, Green };

std::string_view to_string(Band band);

/// Traffic-light cut points on the [-3, 3] scale.
struct BandThresholds {
  double red_below = -1.0;
  double orange_below = -0.25;
  double yellow_up_to = 0.25;
  double light_green_up_to = 1.0;
};

Band band_for(double rating, const BandThresholds& thresholds = {});

/// Sorted profile ratings of a reference population per situation.
struct ReferenceCommunity {
  struct Entry {
    std::string method;
    std::string model_hash;
    std::vector<double> ratings;  // ascending
  };
  std::map<std::string, Entry> situations;
  std::uint64_t seed = 0;

  void validate() const;  // sorted, at least 100 ratings each
  // Fraction of reference ratings <= rating; nullopt without a reference.
  std::optional<double> percentile(const std::string& situation, double rating) const;

  nlohmann::json to_json() const;
  static ReferenceCommunity from_json(const nlohmann::json& j);
};

inline constexpr std::size_t kMinReferenceSize = 100;

// Seeded synthetic profiles drawing objects from a rating table.
std::vector<ProfileDetections> reference_profiles(const SituationModel& objects, std::size_t count,
                                                  std::uint64_t seed, std::size_t photos_per_profile = 100);

/// Rates `size` synthetic profiles per model. Profiles the model cannot rate
/// are skipped; throws DegenerateError when fewer than 100 remain.
ReferenceCommunity build_reference_community(const std::vector<TrainedModel>& models, std::size_t size,
                                             std::uint64_t seed, std::size_t photos_per_profile = 100);

// Every *.json model artifact in `dir`, sorted by (situation, method).
std::vector<TrainedModel> load_models(const std::filesystem::path& dir);

// The model used when a request names no method.
const TrainedModel* default_model(const std::vector<TrainedModel>& models, const std::string& situation);

struct ServiceOptions {
  BandThresholds bands;
  std::string cors_origin = "*";
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
  std::string etag;  // set for profile resources
};

/// Transport-independent request handling. Models and the reference
/// community are immutable; the profile store is guarded by a shared mutex.
class Service {
 public:
  Service(std::vector<TrainedModel> models, ReferenceCommunity reference, ServiceOptions options = {});

  ServiceResponse create_profile(const std::string& body);
  ServiceResponse get_profile(const std::string& id) const;
  ServiceResponse rating(const std::string& id, const std::string& situation,
                         const std::optional<std::string>& method) const;
  ServiceResponse photos(const std::string& id, const std::string& situation,
                         const std::optional<std::string>& method) const;
  ServiceResponse whatif(const std::string& id, const std::string& body,
                         const std::optional<std::string>& method) const;
  ServiceResponse situations() const;
  ServiceResponse models() const;

  const ServiceOptions& options() const { return options_; }
  // Hash over every loaded model artifact.
  const std::string& models_hash() const { return models_hash_; }

 private:
  struct Resolved {
    const TrainedModel* model = nullptr;
    std::optional<ServiceResponse> error;
  };
  Resolved resolve(const std::string& situation, const std::optional<std::string>& method) const;
  std::optional<ProfileDetections> find(const std::string& id) const;
  nlohmann::json rate(const TrainedModel& model, const ProfileDetections& profile) const;

  std::vector<TrainedModel> models_;
  std::vector<std::string> model_hashes_;
  std::string models_hash_;
  ReferenceCommunity reference_;
  ServiceOptions options_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, ProfileDetections> profiles_;
  std::uint64_t next_id_ = 1;
};

ServiceResponse error_response(int status, const std::string& code, const std::string& detail);

/// HTTP front end over a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds to host:port (port 0 picks a free port); returns the bound port.
  int bind(const std::string& host, int port);
  void run();           // blocks until stop()
  void start();         // run() on a background thread
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace exposure
