#include "exposure/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "exposure/errors.hpp"
#include "exposure/rng.hpp"

namespace exposure {

void ForestConfig::validate() const {
  if (n_trees < 1) throw ValidationError("n_trees must be positive");
  if (max_depth && *max_depth < 1) throw ValidationError("max_depth must be positive");
  if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be positive");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) {
    throw ValidationError("feature_fraction must lie in (0, 1]");
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& config,
              std::uint64_t seed)
      : x_(x), y_(y), config_(config), rng_(seed), dim_(x.front().size()) {
    const double wanted = std::ceil(config.feature_fraction * static_cast<double>(dim_) - 1e-9);
    n_candidates_ = std::clamp<std::size_t>(static_cast<std::size_t>(wanted), 1, dim_);
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    RegressionTree tree;
    tree_ = &tree;
    grow(rows, 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;
  };

  int grow(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_->nodes_.size());
    tree_->nodes_.emplace_back();
    double sum = 0.0;
    for (auto r : rows) sum += y_[r];
    const double mean = sum / static_cast<double>(rows.size());
    tree_->nodes_[static_cast<std::size_t>(id)].value = mean;

    const auto leaf_size = static_cast<std::size_t>(config_.min_samples_leaf);
    bool pure = true;
    for (auto r : rows) {
      if (y_[r] != y_[rows.front()]) {
        pure = false;
        break;
      }
    }
    if (pure || rows.size() < 2 * leaf_size || (config_.max_depth && depth >= *config_.max_depth)) {
      return id;
    }
    const Split split = best_split(rows, sum);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_[r][static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_->nodes_[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& rows, double total) {
    std::vector<std::size_t> features(dim_);
    std::iota(features.begin(), features.end(), 0);
    // Partial Fisher-Yates: the first n_candidates_ entries are the sample;
    // the rest are tried only if the sample holds no usable split.
    for (std::size_t i = 0; i + 1 < dim_; ++i) {
      std::swap(features[i], features[i + rng_.below(dim_ - i)]);
    }
    Split best;
    std::vector<std::pair<double, double>> column(rows.size());
    const auto leaf_size = static_cast<std::size_t>(config_.min_samples_leaf);
    const double n = static_cast<double>(rows.size());
    for (std::size_t fi = 0; fi < dim_; ++fi) {
      if (fi >= n_candidates_ && best.feature >= 0) break;
      const std::size_t f = features[fi];
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x_[rows[i]][f], y_[rows[i]]};
      std::sort(column.begin(), column.end());
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_sum += column[i].second;
        const std::size_t nl = i + 1;
        const std::size_t nr = column.size() - nl;
        if (nl < leaf_size || nr < leaf_size) continue;
        if (column[i].first == column[i + 1].first) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(nl) +
                             right_sum * right_sum / static_cast<double>(nr) - total * total / n;
        if (score > best.score) {
          double threshold = 0.5 * (column[i].first + column[i + 1].first);
          if (threshold >= column[i + 1].first) threshold = column[i].first;
          best = {static_cast<int>(f), threshold, score};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  const ForestConfig& config_;
  Rng rng_;
  std::size_t dim_;
  std::size_t n_candidates_ = 1;
  RegressionTree* tree_ = nullptr;
};

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& node = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes_[i].value;
}

std::size_t RegressionTree::depth() const {
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (nodes_[i].feature >= 0) {
      depth[static_cast<std::size_t>(nodes_[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes_[i].right)] = depth[i] + 1;
    }
  }
  return deepest;
}

namespace {

nlohmann::json node_to_json(const std::vector<RegressionTree::Node>& nodes, std::size_t i) {
  const auto& n = nodes[i];
  if (n.feature < 0) return {{"leaf", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_to_json(nodes, static_cast<std::size_t>(n.left))},
          {"right", node_to_json(nodes, static_cast<std::size_t>(n.right))}};
}

int node_from_json(const nlohmann::json& j, std::vector<RegressionTree::Node>& nodes) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (j.contains("leaf")) {
    nodes[static_cast<std::size_t>(id)].value = j.at("leaf").get<double>();
    return id;
  }
  const int l = node_from_json(j.at("left"), nodes);
  const int r = node_from_json(j.at("right"), nodes);
  auto& n = nodes[static_cast<std::size_t>(id)];
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  n.left = l;
  n.right = r;
  return id;
}

}  // namespace

nlohmann::json RegressionTree::to_json() const { return node_to_json(nodes_, 0); }

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  RegressionTree tree;
  node_from_json(j, tree.nodes_);
  return tree;
}

RandomForest RandomForest::fit(const FeatureMatrix& x, std::span<const double> y,
                               const ForestConfig& config) {
  config.validate();
  if (x.empty()) throw ValidationError("random forest needs training rows");
  if (x.size() != y.size()) throw ValidationError("feature and target counts differ");
  const std::size_t dim = x.front().size();
  if (dim == 0) throw ValidationError("feature vectors are empty");
  for (const auto& row : x) {
    if (row.size() != dim) throw ValidationError("feature vectors differ in dimension");
  }

  RandomForest forest;
  forest.dimension_ = dim;
  forest.trees_.reserve(static_cast<std::size_t>(config.n_trees));
  for (int t = 0; t < config.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(config.seed, static_cast<std::uint64_t>(t));
    Rng sampler(derive_seed(tree_seed, 1));
    std::vector<std::size_t> rows(x.size());
    if (config.bootstrap) {
      for (auto& r : rows) r = sampler.below(x.size());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder(x, y, config, derive_seed(tree_seed, 2));
    forest.trees_.push_back(builder.build(std::move(rows)));
  }
  return forest;
}

double RandomForest::predict(std::span<const double> x) const {
  if (x.size() != dimension_) throw ValidationError("feature vector has the wrong dimension");
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"dimension", dimension_}, {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest forest;
  forest.dimension_ = j.at("dimension").get<std::size_t>();
  for (const auto& t : j.at("trees")) forest.trees_.push_back(RegressionTree::from_json(t));
  if (forest.trees_.empty()) throw ValidationError("forest artifact has no trees");
  return forest;
}

}  // namespace exposure
