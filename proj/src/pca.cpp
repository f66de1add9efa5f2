#include "exposure/pca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "exposure/errors.hpp"

namespace exposure {

PcaProjection fit_pca(const FeatureMatrix& x, std::size_t out_dim) {
  if (x.size() < 2) throw ValidationError("PCA needs at least two rows");
  const std::size_t dim = x.front().size();
  if (out_dim == 0 || out_dim > dim) throw ValidationError("PCA output dimension out of range");
  for (const auto& row : x) {
    if (row.size() != dim) throw ValidationError("PCA rows differ in dimension");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd data(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateError("PCA eigendecomposition failed");

  const Eigen::VectorXd values = solver.eigenvalues();
  const Eigen::MatrixXd vectors = solver.eigenvectors();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });

  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  PcaProjection pca;
  pca.mean.assign(mean.data(), mean.data() + d);
  for (std::size_t c = 0; c < out_dim; ++c) {
    const Eigen::Index idx = order[c];
    std::vector<double> component(dim, 0.0);
    double variance = values(idx);
    if (variance > 1e-12 * scale) {
      Eigen::Index arg = 0;
      vectors.col(idx).cwiseAbs().maxCoeff(&arg);
      const double sign = vectors(arg, idx) < 0.0 ? -1.0 : 1.0;
      for (Eigen::Index j = 0; j < d; ++j) component[static_cast<std::size_t>(j)] = sign * vectors(j, idx);
    } else {
      variance = 0.0;
    }
    pca.components.push_back(std::move(component));
    pca.explained_variance.push_back(variance);
  }
  return pca;
}

std::vector<double> PcaProjection::project(std::span<const double> x) const {
  if (x.size() != mean.size()) throw ValidationError("PCA input has the wrong dimension");
  std::vector<double> z(components.size(), 0.0);
  for (std::size_t c = 0; c < components.size(); ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - mean[j]) * components[c][j];
    z[c] = s;
  }
  return z;
}

std::vector<double> PcaProjection::reconstruct(std::span<const double> z) const {
  std::vector<double> x = mean;
  for (std::size_t c = 0; c < components.size(); ++c) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += z[c] * components[c][j];
  }
  return x;
}

nlohmann::json PcaProjection::to_json() const {
  return {{"mean", mean}, {"components", components}, {"explained_variance", explained_variance}};
}

PcaProjection PcaProjection::from_json(const nlohmann::json& j) {
  PcaProjection p;
  p.mean = j.at("mean").get<std::vector<double>>();
  p.components = j.at("components").get<std::vector<std::vector<double>>>();
  p.explained_variance = j.at("explained_variance").get<std::vector<double>>();
  return p;
}

}  // namespace exposure
