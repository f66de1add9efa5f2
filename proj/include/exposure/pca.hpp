#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "exposure/forest.hpp"

namespace exposure {

/// Mean-centred projection onto leading principal directions. Each
/// direction's largest-magnitude loading is positive; directions with no
/// variance are zero vectors.
struct PcaProjection {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // out_dim rows of input dim
  std::vector<double> explained_variance;       // population variance per component

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.size(); }
  std::vector<double> project(std::span<const double> x) const;
  std::vector<double> reconstruct(std::span<const double> z) const;

  nlohmann::json to_json() const;
  static PcaProjection from_json(const nlohmann::json& j);
};

PcaProjection fit_pca(const FeatureMatrix& x, std::size_t out_dim);

}  // namespace exposure
