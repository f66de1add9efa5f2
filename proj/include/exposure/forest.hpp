#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace exposure {

using FeatureMatrix = std::vector<std::vector<double>>;

struct ForestConfig {
  int n_trees = 100;
  std::optional<int> max_depth;  // unlimited when empty
  int min_samples_leaf = 1;
  bool bootstrap = true;
  double feature_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// CART regression tree split on variance reduction; x <= threshold goes left.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  double predict(std::span<const double> x) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const;

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  friend class TreeBuilder;
  std::vector<Node> nodes_;
};

class RandomForest {
 public:
  // Throws ValidationError on empty or ragged input.
  static RandomForest fit(const FeatureMatrix& x, std::span<const double> y,
                          const ForestConfig& config);

  // Mean of the tree predictions.
  double predict(std::span<const double> x) const;
  std::size_t dimension() const { return dimension_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  std::vector<RegressionTree> trees_;
  std::size_t dimension_ = 0;
};

}  // namespace exposure
