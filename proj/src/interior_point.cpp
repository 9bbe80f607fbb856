#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fppe/errors.hpp"
#include "fppe/solver.hpp"

namespace fppe::detail {

namespace {

// Sparse view of the positive-value pairs. Items with no positive value
// have price 0 and drop out of the program.
struct PairPattern {
  std::vector<int> item;        // item index of each active item
  std::vector<int> offset;      // pairs of active item j live in [offset[j], offset[j+1])
  std::vector<int> buyer;       // buyer of each pair
  std::vector<double> value;    // v of each pair
};

PairPattern build_pattern(const ItemBatch& batch) {
  PairPattern pat;
  pat.offset.push_back(0);
  for (int tau = 0; tau < batch.t(); ++tau) {
    bool any = false;
    for (int i = 0; i < batch.n(); ++i) {
      const double v = batch.values(i, tau);
      if (v > 0.0) {
        pat.buyer.push_back(i);
        pat.value.push_back(v);
        any = true;
      }
    }
    if (any) {
      pat.item.push_back(tau);
      pat.offset.push_back(static_cast<int>(pat.buyer.size()));
    }
  }
  return pat;
}

struct Iterate {
  Eigen::VectorXd beta, price, delta;
  std::vector<double> lambda;
};

struct Residuals {
  Eigen::VectorXd r_price;  // sigma - sum_i lambda
  Eigen::VectorXd r_beta;   // -b/beta + sum lambda v + delta
};

struct Direction {
  Eigen::VectorXd beta, price, delta;
  std::vector<double> lambda;
};

}  // namespace

InteriorPointResult interior_point_solve(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                         int max_iterations) {
  const int n = batch.n();
  const double sigma = batch.supply_weight;
  if (!(sigma > 0.0)) throw ArgumentError("supply weight must be positive");
  const PairPattern pat = build_pattern(batch);
  const int items = static_cast<int>(pat.item.size());
  const int pairs = static_cast<int>(pat.buyer.size());
  const int m = pairs + n;

  Iterate it;
  it.beta.resize(n);
  it.price.resize(items);
  it.lambda.assign(pairs, 0.0);
  it.delta = budgets;
  for (int j = 0; j < items; ++j) {
    const int count = pat.offset[j + 1] - pat.offset[j];
    for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k) it.lambda[k] = sigma / count;
  }
  // Start with r_beta = 0: any beta <= b / (b + sum lambda v) leaves
  // delta = b / beta - sum lambda v >= b, and lambda already sums to sigma.
  Eigen::VectorXd earned = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < pairs; ++k) earned[pat.buyer[k]] += it.lambda[k] * pat.value[k];
  for (int i = 0; i < n; ++i) {
    it.beta[i] = std::min(0.9, budgets[i] / (budgets[i] + earned[i]));
    it.delta[i] = budgets[i] / it.beta[i] - earned[i];
  }
  for (int j = 0; j < items; ++j) {
    double top = 0.0;
    for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k) top = std::max(top, it.beta[pat.buyer[k]] * pat.value[k]);
    it.price[j] = 1.5 * top;
  }

  std::vector<double> slack(pairs), dslack(pairs), scale(pairs);
  auto compute_slacks = [&](const Iterate& x) {
    for (int j = 0; j < items; ++j)
      for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k)
        slack[k] = x.price[j] - x.beta[pat.buyer[k]] * pat.value[k];
  };
  auto residuals = [&](const Iterate& x) {
    Residuals r;
    r.r_price = Eigen::VectorXd::Constant(items, sigma);
    r.r_beta = x.delta;
    for (int i = 0; i < n; ++i) r.r_beta[i] -= budgets[i] / x.beta[i];
    for (int j = 0; j < items; ++j)
      for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k) {
        r.r_price[j] -= x.lambda[k];
        r.r_beta[pat.buyer[k]] += x.lambda[k] * pat.value[k];
      }
    return r;
  };
  auto complementarity = [&](const Iterate& x) {
    double total = 0.0;
    for (int k = 0; k < pairs; ++k) total += x.lambda[k] * slack[k];
    for (int i = 0; i < n; ++i) total += x.delta[i] * (1.0 - x.beta[i]);
    return total;
  };

  InteriorPointResult out;
  const double budget_scale = 1.0 + budgets.cwiseAbs().maxCoeff();
  const double gap_target = 1e-15 * (1.0 + budgets.sum());

  Eigen::MatrixXd schur(n, n);
  Eigen::VectorXd item_scale(items);  // d_tau = sum_i lambda / s
  std::vector<double> prefix, suffix;
  double best_merit = std::numeric_limits<double>::infinity();
  Iterate best = it;
  int stall = 0;

  for (int iter = 0; iter < max_iterations; ++iter) {
    compute_slacks(it);
    const Residuals res = residuals(it);
    const double gap = complementarity(it);
    const double mu = gap / m;
    const double rp = items > 0 ? res.r_price.cwiseAbs().maxCoeff() / sigma : 0.0;
    const double rb = res.r_beta.cwiseAbs().maxCoeff() / budget_scale;
    const double merit = std::max({rp, rb, gap / (1.0 + budgets.sum())});
    out.iterations = iter;
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
      stall = 0;
    } else if (++stall > 8) {
      break;
    }
    if (rp < 1e-13 && rb < 1e-13 && gap < gap_target) {
      out.converged = true;
      break;
    }

    // Normal-equation matrix in beta after eliminating prices, multipliers
    // and the upper-bound duals. Each item contributes V (diag(D) - D D^T / d) V,
    // assembled without forming the cancelling diagonal difference.
    schur.setZero();
    for (int i = 0; i < n; ++i)
      schur(i, i) = budgets[i] / (it.beta[i] * it.beta[i]) + it.delta[i] / (1.0 - it.beta[i]);
    for (int j = 0; j < items; ++j) {
      const int lo = pat.offset[j], hi = pat.offset[j + 1], cnt = hi - lo;
      double d = 0.0;
      for (int k = lo; k < hi; ++k) {
        scale[k] = it.lambda[k] / slack[k];
        d += scale[k];
      }
      item_scale[j] = d;
      prefix.assign(cnt + 1, 0.0);
      suffix.assign(cnt + 1, 0.0);
      for (int a = 0; a < cnt; ++a) prefix[a + 1] = prefix[a] + scale[lo + a];
      for (int a = cnt - 1; a >= 0; --a) suffix[a] = suffix[a + 1] + scale[lo + a];
      for (int a = 0; a < cnt; ++a) {
        const int ia = pat.buyer[lo + a];
        const double va = pat.value[lo + a], da = scale[lo + a];
        const double others = prefix[a] + suffix[a + 1];
        schur(ia, ia) += va * va * da * others / d;
        for (int c = a + 1; c < cnt; ++c) {
          const int ic = pat.buyer[lo + c];
          const double off = -va * pat.value[lo + c] * da * scale[lo + c] / d;
          schur(ia, ic) += off;
          schur(ic, ia) += off;
        }
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> factor(schur);
    if (factor.info() != Eigen::Success) break;

    // Solves the Newton system for complementarity targets given per pair
    // (rc) and per buyer (rw), both as "current product minus target".
    auto solve = [&](const std::vector<double>& rc, const Eigen::VectorXd& rw) {
      Direction dir;
      Eigen::VectorXd e(items);
      Eigen::VectorXd rhs(n);
      for (int i = 0; i < n; ++i)
        rhs[i] = -res.r_beta[i] + rw[i] / (1.0 - it.beta[i]);
      for (int j = 0; j < items; ++j) {
        double ej = res.r_price[j];
        for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k) {
          ej += rc[k] / slack[k];
          rhs[pat.buyer[k]] += pat.value[k] * rc[k] / slack[k];
        }
        e[j] = ej;
      }
      for (int j = 0; j < items; ++j)
        for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k)
          rhs[pat.buyer[k]] -= scale[k] * pat.value[k] * e[j] / item_scale[j];
      dir.beta = factor.solve(rhs);
      dir.price.resize(items);
      dir.lambda.resize(pairs);
      for (int j = 0; j < items; ++j) {
        double acc = -e[j];
        for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k)
          acc += scale[k] * pat.value[k] * dir.beta[pat.buyer[k]];
        dir.price[j] = acc / item_scale[j];
        // Multipliers on near-tight pairs lose digits through D * ds; the
        // tightest pair absorbs the mismatch in sum_i dlambda = r_p, which
        // perturbs its complementarity row only by slack * mismatch.
        double mismatch = res.r_price[j];
        int tight = pat.offset[j];
        for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k) {
          const double ds = dir.price[j] - pat.value[k] * dir.beta[pat.buyer[k]];
          dir.lambda[k] = (-rc[k] - it.lambda[k] * ds) / slack[k];
          mismatch -= dir.lambda[k];
          if (scale[k] > scale[tight]) tight = k;
        }
        dir.lambda[tight] += mismatch;
      }
      dir.delta.resize(n);
      for (int i = 0; i < n; ++i)
        dir.delta[i] = (-rw[i] + it.delta[i] * dir.beta[i]) / (1.0 - it.beta[i]);
      return dir;
    };

    auto max_step = [&](const Direction& dir) {
      double step = 1.0;
      for (int i = 0; i < n; ++i) {
        if (dir.beta[i] > 0.0) step = std::min(step, (1.0 - it.beta[i]) / dir.beta[i]);
        // b log beta is better served by at most halving beta per step.
        if (dir.beta[i] < 0.0) step = std::min(step, -0.5 * it.beta[i] / dir.beta[i]);
        if (dir.delta[i] < 0.0) step = std::min(step, -it.delta[i] / dir.delta[i]);
      }
      for (int j = 0; j < items; ++j)
        for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k) {
          const double ds = dir.price[j] - pat.value[k] * dir.beta[pat.buyer[k]];
          dslack[k] = ds;
          if (ds < 0.0) step = std::min(step, -slack[k] / ds);
          if (dir.lambda[k] < 0.0) step = std::min(step, -it.lambda[k] / dir.lambda[k]);
        }
      return step;
    };

    // Predictor.
    std::vector<double> rc(pairs);
    Eigen::VectorXd rw(n);
    for (int k = 0; k < pairs; ++k) rc[k] = it.lambda[k] * slack[k];
    for (int i = 0; i < n; ++i) rw[i] = it.delta[i] * (1.0 - it.beta[i]);
    const Direction aff = solve(rc, rw);
    const double step_aff = max_step(aff);
    double gap_aff = 0.0;
    for (int k = 0; k < pairs; ++k)
      gap_aff += (it.lambda[k] + step_aff * aff.lambda[k]) * (slack[k] + step_aff * dslack[k]);
    for (int i = 0; i < n; ++i)
      gap_aff += (it.delta[i] + step_aff * aff.delta[i]) * (1.0 - it.beta[i] - step_aff * aff.beta[i]);
    double centering = std::pow(std::max(gap_aff, 0.0) / std::max(gap, 1e-300), 3.0);
    // Keep the gap from collapsing ahead of dual feasibility.
    if (rb * budget_scale > gap) centering = std::max(centering, 0.3);

    // Corrector.
    for (int k = 0; k < pairs; ++k) rc[k] += aff.lambda[k] * dslack[k] - centering * mu;
    for (int i = 0; i < n; ++i) rw[i] += -aff.delta[i] * aff.beta[i] - centering * mu;
    const Direction dir = solve(rc, rw);
    const double step = std::min(1.0, 0.995 * max_step(dir));

    it.beta += step * dir.beta;
    it.price += step * dir.price;
    it.delta += step * dir.delta;
    for (int k = 0; k < pairs; ++k) it.lambda[k] += step * dir.lambda[k];
    for (int i = 0; i < n; ++i) it.beta[i] = std::min(it.beta[i], std::nextafter(1.0, 0.0));
  }

  const Iterate& fin = out.converged ? it : best;
  compute_slacks(fin);
  const Residuals res = residuals(fin);
  out.beta = fin.beta;
  out.leftover = fin.delta;
  out.allocation = Eigen::MatrixXd::Zero(n, batch.t());
  for (int j = 0; j < items; ++j)
    for (int k = pat.offset[j]; k < pat.offset[j + 1]; ++k)
      out.allocation(pat.buyer[k], pat.item[j]) = fin.lambda[k] / sigma;
  out.complementarity = complementarity(fin);
  out.dual_residual = std::max(items > 0 ? res.r_price.cwiseAbs().maxCoeff() / sigma : 0.0,
                               res.r_beta.cwiseAbs().maxCoeff());
  return out;
}

}  // namespace fppe::detail
