#include "exposure/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "exposure/errors.hpp"
#include "exposure/rng.hpp"

namespace exposure {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

int nearest_centroid(const std::vector<Point>& centroids, const double* point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c].data(), point, centroids[c].size());
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

namespace {

double assign(const std::vector<Point>& points, const std::vector<Point>& centroids,
              std::vector<int>& assignment, bool& changed) {
  changed = false;
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int c = nearest_centroid(centroids, points[i].data());
    if (assignment[i] != c) {
      assignment[i] = c;
      changed = true;
    }
    inertia += squared_distance(points[i].data(), centroids[static_cast<std::size_t>(c)].data(),
                                points[i].size());
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(const std::vector<Point>& points, int k, std::uint64_t seed,
                    int max_iterations) {
  if (k < 1) throw ValidationError("k-means needs k >= 1");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw DegenerateError("k-means needs at least k points");
  }
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ValidationError("k-means points differ in dimension");
  }

  Rng rng(seed);
  std::vector<Point> centroids;
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  while (centroids.size() < static_cast<std::size_t>(k)) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i],
                            squared_distance(points[i].data(), centroids.back().data(), dim));
      if (nearest[i] > far_d) {
        far_d = nearest[i];
        far = i;
      }
    }
    centroids.push_back(points[far]);
  }

  KMeansResult result;
  result.assignment.assign(points.size(), -1);
  bool changed = true;
  while (result.iterations < max_iterations) {
    result.inertia = assign(points, centroids, result.assignment, changed);
    result.inertia_trace.push_back(result.inertia);
    ++result.iterations;
    if (!changed) break;
    std::vector<Point> sums(static_cast<std::size_t>(k), Point(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(result.assignment[i]);
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
      ++counts[c];
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
      }
    }
  }

  std::sort(centroids.begin(), centroids.end());
  result.centroids = std::move(centroids);
  result.inertia = assign(points, result.centroids, result.assignment, changed);
  return result;
}

double mean_silhouette(const std::vector<Point>& points, const std::vector<int>& assignment) {
  if (points.size() != assignment.size()) throw ValidationError("silhouette: size mismatch");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < points.size(); ++i) members[assignment[i]].push_back(i);
  if (members.size() < 2) throw DegenerateError("silhouette needs at least two clusters");
  const std::size_t dim = points.empty() ? 0 : points.front().size();

  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& own = members[assignment[i]];
    if (own.size() == 1) continue;
    double a = 0.0;
    for (std::size_t j : own) {
      if (j != i) a += std::sqrt(squared_distance(points[i].data(), points[j].data(), dim));
    }
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, others] : members) {
      if (label == assignment[i]) continue;
      double d = 0.0;
      for (std::size_t j : others) d += std::sqrt(squared_distance(points[i].data(), points[j].data(), dim));
      b = std::min(b, d / static_cast<double>(others.size()));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(points.size());
}

}  // namespace exposure
