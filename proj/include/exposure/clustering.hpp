#pragma once

#include <cstdint>
#include <vector>

namespace exposure {

using Point = std::vector<double>;

struct KMeansResult {
  std::vector<Point> centroids;      // sorted lexicographically
  std::vector<int> assignment;       // nearest centroid per point
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace; // after each assignment step
};

/// Lloyd's algorithm with seeded farthest-point initialization. Coincident
/// centroids are allowed when the data has fewer than k distinct points;
/// empty clusters keep their previous centroid. Stops when no assignment
/// changes or after max_iterations.
KMeansResult kmeans(const std::vector<Point>& points, int k, std::uint64_t seed,
                    int max_iterations = 300);

// Index of the nearest centroid; ties go to the lower index.
int nearest_centroid(const std::vector<Point>& centroids, const double* point);

double squared_distance(const double* a, const double* b, std::size_t dim);

/// Mean silhouette over all points. Points in singleton clusters score 0.
/// Clusters that end up empty are ignored.
double mean_silhouette(const std::vector<Point>& points, const std::vector<int>& assignment);

}  // namespace exposure
