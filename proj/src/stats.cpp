#include "exposure/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "exposure/errors.hpp"

namespace exposure {

void RatingSeries::add(std::string user_id, double automatic_rating, double manual_rating) {
  user_ids.push_back(std::move(user_id));
  automatic.push_back(automatic_rating);
  manual.push_back(manual_rating);
}

void RatingSeries::validate() const {
  if (automatic.size() != manual.size() || user_ids.size() != manual.size()) {
    throw ValidationError("rating series lengths differ");
  }
  std::set<std::string> seen(user_ids.begin(), user_ids.end());
  if (seen.size() != user_ids.size()) throw ValidationError("duplicate user in rating series");
}

std::optional<double> try_pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: series lengths differ");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 3) throw DegenerateError("pearson needs at least 3 pairs");
  auto r = try_pearson(x, y);
  if (!r) throw DegenerateError("pearson undefined for a constant series");
  return *r;
}

double pearson(const RatingSeries& series) {
  series.validate();
  return pearson(series.automatic, series.manual);
}

std::vector<double> rank_transform(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

CohenBand cohen_band(double r) {
  const double a = std::abs(r);
  if (a < 0.1) return CohenBand::Negligible;
  if (a < 0.3) return CohenBand::Weak;
  if (a < 0.5) return CohenBand::Moderate;
  return CohenBand::Strong;
}

std::string_view to_string(CohenBand band) {
  switch (band) {
    case CohenBand::Negligible: return "negligible";
    case CohenBand::Weak: return "weak";
    case CohenBand::Moderate: return "moderate";
    case CohenBand::Strong: return "strong";
  }
  return "negligible";
}

AgreementIndex ad_index(const std::vector<std::vector<int>>& ratings_per_item) {
  AgreementIndex out;
  if (ratings_per_item.empty()) throw ValidationError("AD index needs at least one item");
  for (const auto& item : ratings_per_item) {
    if (item.size() < 2) throw ValidationError("AD index needs at least 2 ratings per item");
    double mean = 0.0;
    for (int r : item) mean += r;
    mean /= static_cast<double>(item.size());
    double dev = 0.0;
    for (int r : item) dev += std::abs(r - mean);
    out.per_item.push_back(dev / static_cast<double>(item.size()));
  }
  out.mean = mean_of(out.per_item);
  return out;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace exposure
