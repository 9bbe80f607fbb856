#pragma once

#include <vector>

namespace fppe::stats {

/// Standard normal quantile Phi^{-1}(p), p in (0, 1).
double normal_quantile(double p);

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
double chi2_quantile(double p, int dof);

double mean(const std::vector<double>& xs);
/// Population variance (divides by the sample count).
double variance(const std::vector<double>& xs);
/// Sample skewness m3 / m2^{3/2} (population moments).
double skewness(const std::vector<double>& xs);
/// Excess kurtosis m4 / m2^2 - 3 (population moments).
double excess_kurtosis(const std::vector<double>& xs);
double median(std::vector<double> xs);

}  // namespace fppe::stats
