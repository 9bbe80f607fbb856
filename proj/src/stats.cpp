#include "fppe/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "fppe/errors.hpp"

namespace fppe::stats {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), p);
}

double chi2_quantile(double p, int dof) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("chi2_quantile: p must lie in (0, 1)");
  if (dof < 1) throw ArgumentError("chi2_quantile: need at least one degree of freedom");
  return boost::math::quantile(boost::math::chi_squared(dof), p);
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw ArgumentError("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

namespace {

double central_moment(const std::vector<double>& xs, double m, int order) {
  double s = 0.0;
  for (double x : xs) s += std::pow(x - m, order);
  return s / static_cast<double>(xs.size());
}

}  // namespace

double variance(const std::vector<double>& xs) { return central_moment(xs, mean(xs), 2); }

double skewness(const std::vector<double>& xs) {
  const double m = mean(xs);
  const double m2 = central_moment(xs, m, 2);
  if (m2 <= 0.0) return 0.0;
  return central_moment(xs, m, 3) / std::pow(m2, 1.5);
}

double excess_kurtosis(const std::vector<double>& xs) {
  const double m = mean(xs);
  const double m2 = central_moment(xs, m, 2);
  if (m2 <= 0.0) return 0.0;
  return central_moment(xs, m, 4) / (m2 * m2) - 3.0;
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw ArgumentError("median of an empty sample");
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  if (xs.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(xs.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace fppe::stats
