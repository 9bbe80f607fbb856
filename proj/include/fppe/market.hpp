#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fppe {

enum class ValueFamily { uniform, exponential, truncated_normal, constant, custom_matrix };

std::string_view to_string(ValueFamily family);
ValueFamily parse_value_family(std::string_view name);

/// Per-item value generator. Every family maps the same latent item (an
/// n-vector of U(0,1) draws) to an n-vector of values, so two distributions
/// over the same buyers can be evaluated on a shared item population.
///
///  - uniform:          v_i = low_i + (high_i - low_i) u_i
///  - exponential:      v_i = min(bound, -log(1 - u_i) / rate_i)
///  - truncated_normal: v_i = min(bound, scale_i * |Z_i|), Z_i standard normal
///  - constant:         v_i = level_i
///  - custom_matrix:    column floor(u_0 * K) of an n x K atom matrix
class ValueDistribution {
 public:
  static ValueDistribution uniform(Eigen::VectorXd low, Eigen::VectorXd high);
  static ValueDistribution uniform(int n, double low = 0.0, double high = 1.0);
  static ValueDistribution exponential(Eigen::VectorXd rate, double bound = 3.0);
  static ValueDistribution exponential(int n, double rate = 1.0, double bound = 3.0);
  static ValueDistribution truncated_normal(Eigen::VectorXd scale, double bound = 3.0);
  static ValueDistribution truncated_normal(int n, double scale = 1.0, double bound = 3.0);
  static ValueDistribution constant(Eigen::VectorXd level);
  static ValueDistribution custom_matrix(Eigen::MatrixXd atoms);

  ValueFamily family() const noexcept { return family_; }
  int buyers() const noexcept { return n_; }
  /// Upper envelope v̄ of every value this distribution can produce.
  double value_bound() const noexcept { return bound_; }

  const Eigen::VectorXd& param_a() const noexcept { return a_; }
  const Eigen::VectorXd& param_b() const noexcept { return b_; }
  const Eigen::MatrixXd& atoms() const noexcept { return atoms_; }

  /// Same family with every value multiplied by alpha > 0.
  ValueDistribution scaled(double alpha) const;

  /// Values of one item given its latent uniforms (size n).
  void evaluate(const double* latent, double* out) const;

 private:
  ValueDistribution() = default;

  ValueFamily family_ = ValueFamily::uniform;
  int n_ = 0;
  double bound_ = 1.0;
  Eigen::VectorXd a_;  // low / rate / scale / level
  Eigen::VectorXd b_;  // high (uniform only)
  Eigen::MatrixXd atoms_;
};

struct MarketDefinition {
  Eigen::VectorXd budgets;
  ValueDistribution values;

  MarketDefinition(Eigen::VectorXd budgets, ValueDistribution values);

  int n() const noexcept { return static_cast<int>(budgets.size()); }
  double value_bound() const noexcept { return values.value_bound(); }
};

/// A realized sample of t items: values(i, tau) = v_i(theta^tau).
struct ItemBatch {
  Eigen::MatrixXd values;
  double supply_weight = 1.0;
  std::uint64_t seed = 0;

  int n() const noexcept { return static_cast<int>(values.rows()); }
  int t() const noexcept { return static_cast<int>(values.cols()); }
};

/// Draw t i.i.d. items. Pure function of (mdef, t, seed); supply weight 1/t.
ItemBatch sample_items(const MarketDefinition& mdef, int t, std::uint64_t seed);

/// Latent item draws shared by several value distributions (n x t, entries
/// in (0,1)). sample_items(mdef, t, seed) equals evaluating mdef.values on
/// draw_latent_items(n, t, seed).
Eigen::MatrixXd draw_latent_items(int n, int t, std::uint64_t seed);
Eigen::MatrixXd evaluate_items(const ValueDistribution& dist, const Eigen::MatrixXd& latent);

/// (b, v) -> (alpha b, alpha v). Equilibrium beta and x are unchanged,
/// prices scale by alpha.
std::pair<MarketDefinition, ItemBatch> scale_budgets_and_values(const MarketDefinition& mdef,
                                                                const ItemBatch& batch,
                                                                double alpha);

/// (v, sigma) -> (alpha v, sigma / alpha). Equilibrium (x, beta, p) unchanged.
ItemBatch scale_values_and_supply(const ItemBatch& batch, double alpha);

/// Budget scheme used by the experiments: b_i = U_i + 1 for the first
/// ceil(fraction * n) buyers and b_i = U_i otherwise, U_i ~ U(0,1).
Eigen::VectorXd leftover_budget_scheme(int n, double fraction, std::uint64_t seed);

}  // namespace fppe
