#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "fppe/market.hpp"

namespace fppe {

/// One observed first-price pacing equilibrium.
struct EquilibriumSolution {
  Eigen::VectorXd beta;           // pacing multipliers in (0, 1]
  Eigen::VectorXd prices;         // p_tau = max_i beta_i v_i(tau)
  Eigen::MatrixXd allocation;     // x(i, tau) in [0, 1]
  Eigen::VectorXd leftover;       // delta_i = b_i - sigma <p, x_i>
  Eigen::VectorXd item_utility;   // mu_i = sigma <v_i, x_i>
  Eigen::VectorXd total_utility;  // u_i = mu_i + delta_i
  double revenue = 0.0;           // sigma * sum_tau p_tau
  double nsw = 0.0;               // sum_i b_i log(b_i / beta_i)
  double kkt_residual = 0.0;
};

struct SolverConfig {
  double kkt_tolerance = 1e-9;
  int max_iterations = 300;
  /// Bids within tie_tolerance * p_tau of the price count as tied.
  double tie_tolerance = 1e-7;
  /// Snap the interior-point iterate onto its tie structure so ties and
  /// budget identities hold to roundoff.
  bool refinement = true;
  /// Tolerance used by equilibrium_summary when validating invariants.
  double invariant_tolerance = 1e-6;
};

struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd subgradient;
};

/// H_t(beta) = sigma sum_tau max_i beta_i v_i(tau) - sum_i b_i log beta_i and
/// the subgradient that sends each item to its lowest-index highest bidder.
/// Only beta > 0 is required; the formula is evaluated as is for beta > 1.
ObjectiveValue dual_eg_objective(const Eigen::VectorXd& beta, const ItemBatch& batch,
                                 const Eigen::VectorXd& budgets);

/// Minimizer of H_t over (0, 1]^n with KKT residual <= cfg.kkt_tolerance.
/// Throws SolverError carrying the best residual when that is not reached.
Eigen::VectorXd solve_dual_eg(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                              const SolverConfig& cfg = {});

struct AllocationResult {
  Eigen::VectorXd prices;
  Eigen::MatrixXd allocation;
  Eigen::VectorXd leftover;
};

/// Prices, allocation and leftover budgets consistent with beta. Items with a
/// unique highest bid go to that buyer; tied items are split by the
/// minimum-norm allocation meeting every paced buyer's budget exactly.
/// Throws ConsistencyError if no feasible split exists (beta not converged).
AllocationResult recover_allocation(const Eigen::VectorXd& beta, const ItemBatch& batch,
                                    const Eigen::VectorXd& budgets, const SolverConfig& cfg = {});

/// Fills the derived equilibrium quantities and validates every invariant
/// at cfg.invariant_tolerance (ConsistencyError otherwise).
EquilibriumSolution equilibrium_summary(const Eigen::VectorXd& beta, const Eigen::VectorXd& prices,
                                        const Eigen::MatrixXd& allocation, const ItemBatch& batch,
                                        const Eigen::VectorXd& budgets,
                                        const SolverConfig& cfg = {});

/// solve_dual_eg + recover_allocation + equilibrium_summary.
EquilibriumSolution solve_fppe(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                               const SolverConfig& cfg = {});

/// Residual of the optimality conditions measured with subgradient
/// mu - b / beta of a concrete allocation: |g_i| for beta_i < 1 and
/// max(0, g_i) for beta_i = 1.
double kkt_residual(const Eigen::VectorXd& beta, const Eigen::MatrixXd& allocation,
                    const ItemBatch& batch, const Eigen::VectorXd& budgets);

/// Stochastic dual averaging on fresh draws from the limit market. Returns
/// the average of the iterates, an estimate of the limit beta*.
Eigen::VectorXd solve_limit_dual_averaging(const MarketDefinition& mdef, long long iterations,
                                           std::uint64_t seed);

/// E[max_i beta_i v_i] estimated from `samples` fresh items.
double limit_revenue(const MarketDefinition& mdef, const Eigen::VectorXd& beta, long long samples,
                     std::uint64_t seed);

namespace detail {

struct InteriorPointResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd allocation;  // lambda / sigma, dense n x t
  Eigen::VectorXd leftover;
  int iterations = 0;
  double complementarity = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
};

/// Primal-dual interior point method on the epigraph form
///   min sigma sum p_tau - sum b_i log beta_i
///   s.t. p_tau >= beta_i v_i(tau), beta_i <= 1.
InteriorPointResult interior_point_solve(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                         int max_iterations);

/// Snap beta onto the tie structure it (approximately) exhibits: bids within
/// relative gap `tie_gap` of the price are taken as tied, tied buyers get
/// exactly equal paced bids and each connected group is scaled to spend its
/// budget or to hit beta = 1.
Eigen::VectorXd polish_beta(const Eigen::VectorXd& beta, const ItemBatch& batch,
                            const Eigen::VectorXd& budgets, double tie_gap);

}  // namespace detail

}  // namespace fppe
