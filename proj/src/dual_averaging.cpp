#include <algorithm>
#include <vector>

#include "fppe/errors.hpp"
#include "fppe/rng.hpp"
#include "fppe/solver.hpp"

namespace fppe {

Eigen::VectorXd solve_limit_dual_averaging(const MarketDefinition& mdef, long long iterations,
                                           std::uint64_t seed) {
  if (iterations < 1) throw ArgumentError("dual averaging needs at least one iteration");
  const int n = mdef.n();
  const Eigen::VectorXd& b = mdef.budgets;
  Rng rng(seed);
  std::vector<double> latent(n), value(n);
  Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd beta_sum = Eigen::VectorXd::Zero(n);

  for (long long k = 1; k <= iterations; ++k) {
    for (int i = 0; i < n; ++i) latent[i] = rng.uniform();
    mdef.values.evaluate(latent.data(), value.data());
    int winner = 0;
    double best = beta[0] * value[0];
    for (int i = 1; i < n; ++i)
      if (beta[i] * value[i] > best) {
        best = beta[i] * value[i];
        winner = i;
      }
    grad_sum[winner] += value[winner];
    // argmin over (0,1]^n of <g_bar, beta> - sum b log beta.
    const double inv_k = 1.0 / static_cast<double>(k);
    for (int i = 0; i < n; ++i) {
      const double g = grad_sum[i] * inv_k;
      beta[i] = g > b[i] ? b[i] / g : 1.0;
    }
    beta_sum += beta;
  }
  return beta_sum / static_cast<double>(iterations);
}

double limit_revenue(const MarketDefinition& mdef, const Eigen::VectorXd& beta, long long samples,
                     std::uint64_t seed) {
  if (samples < 1) throw ArgumentError("limit_revenue needs at least one sample");
  if (beta.size() != mdef.n()) throw ArgumentError("limit_revenue: beta has wrong size");
  const int n = mdef.n();
  Rng rng(seed);
  std::vector<double> latent(n), value(n);
  double total = 0.0;
  for (long long k = 0; k < samples; ++k) {
    for (int i = 0; i < n; ++i) latent[i] = rng.uniform();
    mdef.values.evaluate(latent.data(), value.data());
    double best = 0.0;
    for (int i = 0; i < n; ++i) best = std::max(best, beta[i] * value[i]);
    total += best;
  }
  return total / static_cast<double>(samples);
}

}  // namespace fppe
