#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace exposure {

/// Paired automatic and manual ratings of the same users for one
/// situation/method.
struct RatingSeries {
  std::vector<std::string> user_ids;
  std::vector<double> automatic;
  std::vector<double> manual;

  void add(std::string user_id, double automatic_rating, double manual_rating);
  std::size_t size() const { return automatic.size(); }
  // Equal lengths and unique users.
  void validate() const;
};

// Product-moment correlation; nullopt when n < 2 or either side is constant.
std::optional<double> try_pearson(std::span<const double> x, std::span<const double> y);

// Throws DegenerateError when n < 3 or either series is constant.
double pearson(const RatingSeries& series);
double pearson(std::span<const double> x, std::span<const double> y);

// Fractional ranks (ties share their average rank), 1-based.
std::vector<double> rank_transform(std::span<const double> values);

enum class CohenBand { Negligible, Weak, Moderate, Strong };

CohenBand cohen_band(double r);
std::string_view to_string(CohenBand band);

struct AgreementIndex {
  std::vector<double> per_item;
  double mean = 0.0;
};

inline constexpr double kAcceptableAgreement = 1.2;

/// Average deviation index: mean absolute deviation around each item's mean.
AgreementIndex ad_index(const std::vector<std::vector<int>>& ratings_per_item);

double mean_of(std::span<const double> v);
// Population standard deviation.
double stddev_of(std::span<const double> v);

}  // namespace exposure
