#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fppe/errors.hpp"
#include "fppe/solver.hpp"

namespace fppe {

namespace {

// Euclidean projection onto the probability simplex, in place.
void project_simplex(std::vector<double>& z, std::vector<double>& sorted) {
  sorted = z;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) theta = candidate;
  }
  for (double& v : z) v = std::max(v - theta, 0.0);
}

struct TiedItem {
  int item;
  std::vector<int> members;  // local buyer indices
  std::vector<double> values;
};

// Minimum-norm split of the tied items: min 1/2 |x|^2 subject to each tied
// item summing to one, V x = R for free buyers and V x <= R for capped
// buyers. Solved on the dual through a projected semismooth Newton method;
// returns x laid out like `tied`.
std::vector<std::vector<double>> min_norm_split(const std::vector<TiedItem>& tied,
                                                const Eigen::VectorXd& target,
                                                const std::vector<bool>& capped) {
  const int m = static_cast<int>(target.size());
  std::vector<std::vector<double>> x(tied.size());
  std::vector<double> scratch;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m);

  double scale = 1.0 + target.cwiseAbs().maxCoeff();
  {
    Eigen::VectorXd row_mass = Eigen::VectorXd::Zero(m);
    for (const auto& ti : tied)
      for (std::size_t a = 0; a < ti.members.size(); ++a) row_mass[ti.members[a]] += ti.values[a];
    scale += row_mass.maxCoeff();
  }
  const double tol = 1e-13 * scale;
  const double eta = 1e-14;

  auto evaluate = [&](const Eigen::VectorXd& cc, Eigen::VectorXd* grad) {
    double q = cc.dot(target) - 0.5 * eta * cc.squaredNorm();
    if (grad) *grad = target - eta * cc;
    for (std::size_t j = 0; j < tied.size(); ++j) {
      const auto& ti = tied[j];
      auto& xj = x[j];
      xj.resize(ti.members.size());
      for (std::size_t a = 0; a < ti.members.size(); ++a) xj[a] = cc[ti.members[a]] * ti.values[a];
      std::vector<double> z = xj;
      project_simplex(xj, scratch);
      for (std::size_t a = 0; a < ti.members.size(); ++a) {
        q += 0.5 * xj[a] * xj[a] - z[a] * xj[a];
        if (grad) (*grad)[ti.members[a]] -= ti.values[a] * xj[a];
      }
    }
    return q;
  };
  auto projected = [&](const Eigen::VectorXd& cc, const Eigen::VectorXd& g) {
    Eigen::VectorXd pg = g;
    for (int i = 0; i < m; ++i)
      if (capped[i]) pg[i] = std::min(cc[i] + g[i], 0.0) - cc[i];
    return pg;
  };

  Eigen::VectorXd grad;
  double q = evaluate(c, &grad);
  Eigen::MatrixXd hess(m, m);
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd pg = projected(c, grad);
    const double pg_norm = pg.cwiseAbs().maxCoeff();
    if (pg_norm <= tol) break;

    const double eps_active = std::min(1e-10, pg_norm);
    std::vector<bool> fixed(m, false);
    for (int i = 0; i < m; ++i) fixed[i] = capped[i] && c[i] >= -eps_active && grad[i] > 0.0;

    hess.setZero();
    for (std::size_t j = 0; j < tied.size(); ++j) {
      const auto& ti = tied[j];
      std::vector<int> support;
      for (std::size_t a = 0; a < ti.members.size(); ++a)
        if (x[j][a] > 0.0) support.push_back(static_cast<int>(a));
      const double inv = 1.0 / static_cast<double>(support.size());
      for (int a : support) {
        const int ia = ti.members[a];
        hess(ia, ia) += ti.values[a] * ti.values[a];
        for (int b : support) hess(ia, ti.members[b]) -= ti.values[a] * ti.values[b] * inv;
      }
    }
    std::vector<int> free_idx;
    for (int i = 0; i < m; ++i)
      if (!fixed[i]) free_idx.push_back(i);
    const int f = static_cast<int>(free_idx.size());
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(m);
    if (f > 0) {
      Eigen::MatrixXd hf(f, f);
      Eigen::VectorXd gf(f);
      for (int a = 0; a < f; ++a) {
        gf[a] = grad[free_idx[a]];
        for (int b = 0; b < f; ++b) hf(a, b) = hess(free_idx[a], free_idx[b]);
      }
      const double damping = eta + std::min(1e-3, pg_norm / scale) * (1.0 + hf.diagonal().maxCoeff());
      hf.diagonal().array() += damping;
      const Eigen::VectorXd df = hf.ldlt().solve(gf);
      for (int a = 0; a < f; ++a) dir[free_idx[a]] = df[a];
    }

    // Near the optimum q changes below its own rounding, so a step that keeps
    // q within rounding is also accepted when it shrinks the projected gradient.
    Eigen::VectorXd cand, cand_grad;
    double cand_q = q;
    bool accepted = false;
    for (const Eigen::VectorXd* d : {&dir, &grad}) {
      double step = (d == &grad) ? 1.0 / (1.0 + hess.diagonal().maxCoeff()) : 1.0;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        cand = c + step * (*d);
        for (int i = 0; i < m; ++i)
          if (capped[i]) cand[i] = std::min(cand[i], 0.0);
        if ((cand - c).squaredNorm() == 0.0) break;
        cand_q = evaluate(cand, &cand_grad);
        const bool within_rounding = cand_q >= q - 1e-10 * (1.0 + std::abs(q));
        if (cand_q >= q + 1e-4 * grad.dot(cand - c) ||
            (within_rounding && projected(cand, cand_grad).cwiseAbs().maxCoeff() < 0.9 * pg_norm)) {
          accepted = true;
          break;
        }
      }
      if (accepted) break;
    }
    if (!accepted) break;
    c = cand;
    q = cand_q;
    grad = cand_grad;
  }
  evaluate(c, nullptr);
  return x;
}

}  // namespace

AllocationResult recover_allocation(const Eigen::VectorXd& beta, const ItemBatch& batch,
                                    const Eigen::VectorXd& budgets, const SolverConfig& cfg) {
  const int n = batch.n(), t = batch.t();
  if (beta.size() != n || budgets.size() != n)
    throw ArgumentError("recover_allocation: dimension mismatch");
  const double sigma = batch.supply_weight;

  AllocationResult res;
  res.prices = Eigen::VectorXd::Zero(t);
  res.allocation = Eigen::MatrixXd::Zero(n, t);
  res.leftover = Eigen::VectorXd::Zero(n);

  std::vector<bool> capped(n);
  for (int i = 0; i < n; ++i) capped[i] = beta[i] >= 1.0 - 1e-12;

  Eigen::VectorXd unique_mass = Eigen::VectorXd::Zero(n);  // sum of v over uniquely won items
  std::vector<TiedItem> tied;
  std::vector<int> local(n, -1), global;
  for (int tau = 0; tau < t; ++tau) {
    double p = 0.0;
    for (int i = 0; i < n; ++i) p = std::max(p, beta[i] * batch.values(i, tau));
    res.prices[tau] = p;
    if (!(p > 0.0)) continue;
    TiedItem ti{tau, {}, {}};
    std::vector<int> winners;
    for (int i = 0; i < n; ++i)
      if (beta[i] * batch.values(i, tau) >= p * (1.0 - cfg.tie_tolerance)) winners.push_back(i);
    if (winners.size() == 1) {
      res.allocation(winners[0], tau) = 1.0;
      unique_mass[winners[0]] += batch.values(winners[0], tau);
      continue;
    }
    for (int i : winners) {
      if (local[i] < 0) {
        local[i] = static_cast<int>(global.size());
        global.push_back(i);
      }
      ti.members.push_back(local[i]);
      ti.values.push_back(batch.values(i, tau));
    }
    tied.push_back(std::move(ti));
  }

  if (!tied.empty()) {
    const int m = static_cast<int>(global.size());
    Eigen::VectorXd target(m);
    std::vector<bool> local_capped(m);
    for (int a = 0; a < m; ++a) {
      const int i = global[a];
      target[a] = budgets[i] / (sigma * beta[i]) - unique_mass[i];
      local_capped[a] = capped[i];
    }
    const auto split = min_norm_split(tied, target, local_capped);
    for (std::size_t j = 0; j < tied.size(); ++j)
      for (std::size_t a = 0; a < tied[j].members.size(); ++a)
        res.allocation(global[tied[j].members[a]], tied[j].item) = split[j][a];
  }

  for (int i = 0; i < n; ++i) {
    const double spend = sigma * res.allocation.row(i).dot(res.prices);
    const double gap = budgets[i] - spend;
    if (capped[i]) {
      if (gap < -cfg.invariant_tolerance)
        throw ConsistencyError("recover_allocation: buyer " + std::to_string(i) +
                               " overspends by " + std::to_string(-gap));
      res.leftover[i] = std::max(gap, 0.0);
    } else if (std::abs(gap) > cfg.invariant_tolerance) {
      throw ConsistencyError("recover_allocation: paced buyer " + std::to_string(i) +
                             " budget mismatch " + std::to_string(gap) +
                             " (beta not at equilibrium)");
    }
  }
  return res;
}

}  // namespace fppe
