#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fppe/errors.hpp"
#include "fppe/solver.hpp"

namespace fppe {

namespace detail {

namespace {
constexpr double kCapThreshold = 1e-12;
}  // namespace

Eigen::VectorXd polish_beta(const Eigen::VectorXd& beta, const ItemBatch& batch,
                            const Eigen::VectorXd& budgets, double tie_gap) {
  const int n = batch.n(), t = batch.t();
  const double sigma = batch.supply_weight;

  std::vector<std::vector<int>> winners(t);
  std::vector<std::vector<int>> items_of(n);
  for (int tau = 0; tau < t; ++tau) {
    double p = 0.0;
    for (int i = 0; i < n; ++i) p = std::max(p, beta[i] * batch.values(i, tau));
    if (!(p > 0.0)) continue;
    for (int i = 0; i < n; ++i)
      if (beta[i] * batch.values(i, tau) >= p * (1.0 - tie_gap)) {
        winners[tau].push_back(i);
        items_of[i].push_back(tau);
      }
  }

  // Bid ratios along a spanning forest of the buyer-item tie graph.
  Eigen::VectorXd ratio = Eigen::VectorXd::Zero(n);
  std::vector<int> component(n, -1);
  std::vector<int> queue;
  Eigen::VectorXd out = Eigen::VectorXd::Ones(n);
  std::vector<char> item_seen(t, 0);
  for (int root = 0; root < n; ++root) {
    if (component[root] >= 0) continue;
    if (items_of[root].empty()) {
      component[root] = root;
      continue;  // wins nothing: beta = 1
    }
    queue.assign(1, root);
    component[root] = root;
    ratio[root] = 1.0;
    std::vector<int> comp_items;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int i = queue[head];
      for (int tau : items_of[i]) {
        if (!item_seen[tau]) {
          item_seen[tau] = 1;
          comp_items.push_back(tau);
        }
        for (int k : winners[tau]) {
          if (component[k] >= 0) continue;
          component[k] = root;
          ratio[k] = ratio[i] * batch.values(i, tau) / batch.values(k, tau);
          queue.push_back(k);
        }
      }
    }
    double spend_rate = 0.0;
    for (int tau : comp_items) {
      const int w = winners[tau].front();
      spend_rate += ratio[w] * batch.values(w, tau);
    }
    spend_rate *= sigma;
    double budget = 0.0, top_ratio = 0.0;
    for (int i : queue) {
      budget += budgets[i];
      top_ratio = std::max(top_ratio, ratio[i]);
    }
    const double cap = 1.0 / top_ratio;
    const double c = spend_rate > 0.0 ? std::min(budget / spend_rate, cap) : cap;
    for (int i : queue) out[i] = (c == cap && ratio[i] == top_ratio) ? 1.0 : std::min(1.0, c * ratio[i]);
  }
  // Ratio chains through equal values can land a few ulps below 1.
  for (int i = 0; i < n; ++i)
    if (out[i] >= 1.0 - kCapThreshold) out[i] = 1.0;
  return out;
}

}  // namespace detail

namespace {

void validate_problem(const ItemBatch& batch, const Eigen::VectorXd& budgets) {
  if (batch.t() < 1 || batch.n() < 1) throw ArgumentError("empty item batch");
  if (budgets.size() != batch.n()) throw ArgumentError("budget count does not match buyers");
  if (!(batch.supply_weight > 0.0) || !std::isfinite(batch.supply_weight))
    throw ArgumentError("supply weight must be positive");
  for (double b : budgets)
    if (!(b > 0.0) || !std::isfinite(b)) throw ArgumentError("budgets must be positive");
  if (!batch.values.allFinite() || batch.values.minCoeff() < 0.0)
    throw ArgumentError("values must be finite and nonnegative");
}

double candidate_residual(const Eigen::VectorXd& beta, const ItemBatch& batch,
                          const Eigen::VectorXd& budgets, const SolverConfig& cfg) {
  if (!beta.allFinite() || beta.minCoeff() <= 0.0 || beta.maxCoeff() > 1.0)
    return std::numeric_limits<double>::infinity();
  try {
    const AllocationResult alloc = recover_allocation(beta, batch, budgets, cfg);
    return kkt_residual(beta, alloc.allocation, batch, budgets);
  } catch (const ConsistencyError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

Eigen::VectorXd solve_dual_eg(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                              const SolverConfig& cfg) {
  validate_problem(batch, budgets);
  if (!(cfg.kkt_tolerance > 0.0) || !(cfg.tie_tolerance > 0.0) || cfg.max_iterations < 1)
    throw ArgumentError("solver tolerances and iteration limit must be positive");

  const detail::InteriorPointResult ipm =
      detail::interior_point_solve(batch, budgets, cfg.max_iterations);

  Eigen::VectorXd best = ipm.beta.cwiseMax(1e-12).cwiseMin(1.0);
  for (double& b : best)
    if (b >= 1.0 - 1e-12) b = 1.0;
  double best_residual = candidate_residual(best, batch, budgets, cfg);
  if (cfg.refinement) {
    for (double gap : {1e-9, 1e-7, 1e-5, 1e-11, 1e-3}) {
      if (best_residual <= cfg.kkt_tolerance) break;
      Eigen::VectorXd cand = ipm.beta;
      for (int pass = 0; pass < 5; ++pass) {
        Eigen::VectorXd next = detail::polish_beta(cand, batch, budgets, gap);
        const bool same = next == cand;
        cand = std::move(next);
        if (same) break;
      }
      const double r = candidate_residual(cand, batch, budgets, cfg);
      if (r < best_residual) {
        best_residual = r;
        best = cand;
      }
    }
  }
  if (!(best_residual <= cfg.kkt_tolerance))
    throw SolverError("dual EG solve did not reach the KKT tolerance (residual " +
                          std::to_string(best_residual) + ")",
                      best_residual);
  return best;
}

EquilibriumSolution equilibrium_summary(const Eigen::VectorXd& beta, const Eigen::VectorXd& prices,
                                        const Eigen::MatrixXd& allocation, const ItemBatch& batch,
                                        const Eigen::VectorXd& budgets, const SolverConfig& cfg) {
  const int n = batch.n(), t = batch.t();
  if (beta.size() != n || budgets.size() != n || prices.size() != t || allocation.rows() != n ||
      allocation.cols() != t)
    throw ArgumentError("equilibrium_summary: dimension mismatch");
  const double tol = cfg.invariant_tolerance;
  const double sigma = batch.supply_weight;
  auto fail = [](const std::string& what) { throw ConsistencyError("invariant violated: " + what); };

  for (int i = 0; i < n; ++i)
    if (!(beta[i] > 0.0) || beta[i] > 1.0) fail("beta outside (0, 1]");
  for (int tau = 0; tau < t; ++tau) {
    double top = 0.0;
    for (int i = 0; i < n; ++i) top = std::max(top, beta[i] * batch.values(i, tau));
    if (std::abs(prices[tau] - top) > tol) fail("price differs from highest paced bid");
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = allocation(i, tau);
      if (x < -tol || x > 1.0 + tol) fail("allocation outside [0, 1]");
      if (x > tol && beta[i] * batch.values(i, tau) < top - tol) fail("item given to a losing bidder");
      mass += x;
    }
    if (mass > 1.0 + tol) fail("item over-allocated");
    if (prices[tau] > tol && std::abs(mass - 1.0) > tol) fail("priced item not fully allocated");
  }

  EquilibriumSolution sol;
  sol.beta = beta;
  sol.prices = prices;
  sol.allocation = allocation;
  sol.item_utility = sigma * (allocation.cwiseProduct(batch.values)).rowwise().sum();
  sol.leftover.resize(n);
  for (int i = 0; i < n; ++i) {
    const double gap = budgets[i] - sigma * allocation.row(i).dot(prices);
    if (gap < -tol) fail("budget exceeded by buyer " + std::to_string(i));
    if (gap > tol && beta[i] < 1.0 - tol) fail("leftover budget for a paced buyer");
    sol.leftover[i] = std::max(gap, 0.0);
  }
  sol.total_utility = sol.item_utility + sol.leftover;
  for (int i = 0; i < n; ++i)
    if (std::abs(sol.total_utility[i] - budgets[i] / beta[i]) > tol * (1.0 + budgets[i] / beta[i]))
      fail("total utility differs from b / beta");
  sol.revenue = sigma * prices.sum();
  sol.nsw = 0.0;
  for (int i = 0; i < n; ++i) sol.nsw += budgets[i] * std::log(budgets[i] / beta[i]);
  sol.kkt_residual = kkt_residual(beta, allocation, batch, budgets);
  return sol;
}

EquilibriumSolution solve_fppe(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                               const SolverConfig& cfg) {
  const Eigen::VectorXd beta = solve_dual_eg(batch, budgets, cfg);
  const AllocationResult alloc = recover_allocation(beta, batch, budgets, cfg);
  return equilibrium_summary(beta, alloc.prices, alloc.allocation, batch, budgets, cfg);
}

}  // namespace fppe
