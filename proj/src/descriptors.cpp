#include "exposure/descriptors.hpp"

#include <algorithm>

#include "exposure/clustering.hpp"
#include "exposure/errors.hpp"
#include "indexed.hpp"

namespace exposure {

namespace {

std::optional<ImageDescriptor> describe(const std::string& photo_id,
                                        const detail::IndexedPhoto& photo,
                                        const std::vector<double>& rating,
                                        const std::vector<double>& eta, double default_eta) {
  double positive = 0.0;
  double negative = 0.0;
  double confidence = 0.0;
  std::size_t valid = 0;
  for (const auto& d : photo.detections) {
    const bool known = d.object >= 0;
    const auto o = static_cast<std::size_t>(known ? d.object : 0);
    const double threshold = known ? eta[o] : default_eta;
    if (d.confidence < threshold) continue;
    ++valid;
    confidence += d.confidence;
    const double r = known ? rating[o] : 0.0;
    if (r >= 0.0) {
      positive += r;
    } else {
      negative += r;
    }
  }
  if (valid == 0) return std::nullopt;
  const double n = static_cast<double>(valid);
  return ImageDescriptor{photo_id, positive / n, negative / n, confidence / n};
}

}  // namespace

std::optional<ImageDescriptor> image_descriptor(const PhotoDetections& photo,
                                                const SituationModel& model,
                                                const ThresholdTable& thresholds) {
  const detail::ObjectIndex index(model);
  const auto indexed = detail::index_profile(ProfileDetections{"", {photo}}, index);
  return describe(photo.photo_id, indexed.photos.front(), index.ratings(), index.etas(thresholds),
                  thresholds.default_eta);
}

std::vector<ImageDescriptor> profile_descriptors(const ProfileDetections& profile,
                                                 const SituationModel& model,
                                                 const ThresholdTable& thresholds) {
  const detail::ObjectIndex index(model);
  const auto indexed = detail::index_profile(profile, index);
  const auto eta = index.etas(thresholds);
  std::vector<ImageDescriptor> out;
  for (std::size_t j = 0; j < indexed.photos.size(); ++j) {
    auto d = describe(profile.photos[j].photo_id, indexed.photos[j], index.ratings(), eta,
                      thresholds.default_eta);
    if (d) out.push_back(std::move(*d));
  }
  return out;
}

int ClusterModel::assign(const std::array<double, 3>& point) const {
  int best = 0;
  double best_d = 0.0;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c].data(), point.data(), 3);
    if (c == 0 || d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

ClusterModel fit_clusters(std::span<const ImageDescriptor> descriptors, int k,
                          std::uint64_t seed) {
  if (k < 1) throw ValidationError("cluster count must be positive");
  if (descriptors.size() < static_cast<std::size_t>(k)) {
    throw DegenerateError("fewer image descriptors than clusters");
  }
  std::vector<Point> points;
  points.reserve(descriptors.size());
  for (const auto& d : descriptors) points.push_back({d.positive, d.negative, d.confidence});
  const auto result = kmeans(points, k, seed);
  ClusterModel model;
  model.k = k;
  model.seed = seed;
  for (const auto& c : result.centroids) model.centroids.push_back({c[0], c[1], c[2]});
  return model;
}

UserDescriptor user_descriptor(const std::string& user_id,
                               std::span<const ImageDescriptor> descriptors,
                               const ClusterModel& clusters, VarianceMode mode) {
  if (descriptors.empty()) {
    throw ValidationError("profile " + user_id + " has no photo with a valid detection");
  }
  std::vector<std::array<double, 3>> points;
  points.reserve(descriptors.size());
  for (const auto& d : descriptors) points.push_back(d.values());
  std::sort(points.begin(), points.end());

  const auto k = static_cast<std::size_t>(clusters.k);
  std::vector<std::vector<std::array<double, 3>>> members(k);
  for (const auto& p : points) members[static_cast<std::size_t>(clusters.assign(p))].push_back(p);

  UserDescriptor out{user_id, std::vector<double>(4 * k, 0.0)};
  for (std::size_t c = 0; c < k; ++c) {
    const auto& m = members[c];
    if (m.empty()) continue;
    const double n = static_cast<double>(m.size());
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    for (const auto& p : m) {
      for (int a = 0; a < 3; ++a) mean[a] += p[a];
    }
    for (auto& v : mean) v /= n;
    double variance_sum = 0.0;
    for (int a = 0; a < 3; ++a) {
      double ss = 0.0;
      for (const auto& p : m) ss += (p[a] - mean[a]) * (p[a] - mean[a]);
      variance_sum += ss / n;
    }
    const double variance = mode == VarianceMode::Trace ? variance_sum : variance_sum / 3.0;
    for (int a = 0; a < 3; ++a) out.values[4 * c + a] = mean[a];
    out.values[4 * c + 3] = variance;
  }
  return out;
}

}  // namespace exposure
