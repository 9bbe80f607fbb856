#include "fppe/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fppe/errors.hpp"
#include "fppe/stats.hpp"

namespace fppe {

bool ConfidenceRegion::contains(const Eigen::VectorXd& point) const {
  if (point.size() != center.size()) throw ArgumentError("confidence region: dimension mismatch");
  const Eigen::VectorXd diff = point - center;
  if (shape.size() == 0 || shape.cwiseAbs().maxCoeff() == 0.0 || radius == 0.0)
    return diff.cwiseAbs().maxCoeff() <= 1e-9;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shape);
  const Eigen::VectorXd coords = eig.eigenvectors().transpose() * diff;
  const double cutoff = 1e-12 * std::max(eig.eigenvalues().maxCoeff(), 0.0);
  double norm2 = 0.0;
  for (Eigen::Index k = 0; k < coords.size(); ++k) {
    const double lambda = eig.eigenvalues()[k];
    if (lambda > cutoff) {
      norm2 += coords[k] * coords[k] / lambda;
    } else if (std::abs(coords[k]) > 1e-9) {
      return false;
    }
  }
  return std::sqrt(norm2) <= radius;
}

Eigen::VectorXi estimate_active_set(const Eigen::VectorXd& beta, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ArgumentError("epsilon must lie in (0, 1)");
  Eigen::VectorXi ind(beta.size());
  for (Eigen::Index i = 0; i < beta.size(); ++i) ind[i] = beta[i] < 1.0 - epsilon ? 1 : 0;
  return ind;
}

namespace {

struct TopBids {
  double bid[3];
  int who[3];
};

// Highest paced bid on an item among buyers other than i and j.
double best_excluding(const TopBids& top, int i, int j) {
  for (int k = 0; k < 3; ++k)
    if (top.who[k] != i && top.who[k] != j) return top.bid[k];
  return 0.0;
}

std::vector<TopBids> top_bids(const ItemBatch& batch, const Eigen::VectorXd& beta) {
  const int n = batch.n(), t = batch.t();
  std::vector<TopBids> tops(t);
  for (int tau = 0; tau < t; ++tau) {
    TopBids& tb = tops[tau];
    for (int k = 0; k < 3; ++k) {
      tb.bid[k] = 0.0;
      tb.who[k] = -1;
    }
    for (int i = 0; i < n; ++i) {
      const double bid = beta[i] * batch.values(i, tau);
      int pos = 3;
      while (pos > 0 && bid > tb.bid[pos - 1]) --pos;
      if (pos == 3) continue;
      for (int k = 2; k > pos; --k) {
        tb.bid[k] = tb.bid[k - 1];
        tb.who[k] = tb.who[k - 1];
      }
      tb.bid[pos] = bid;
      tb.who[pos] = i;
    }
  }
  return tops;
}

void check_stencil_inputs(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                          const Eigen::VectorXd& beta, double epsilon) {
  if (beta.size() != batch.n() || budgets.size() != batch.n())
    throw ArgumentError("numerical_hessian: dimension mismatch");
  if (!(epsilon > 0.0)) throw ArgumentError("numerical_hessian: epsilon must be positive");
}

// Second difference along e_i with step 2 epsilon, price term only.
double price_diagonal(const ItemBatch& batch, const std::vector<TopBids>& tops,
                      const Eigen::VectorXd& beta, double epsilon, int i) {
  double acc = 0.0;
  const double up = beta[i] + 2.0 * epsilon, down = beta[i] - 2.0 * epsilon;
  for (int tau = 0; tau < batch.t(); ++tau) {
    const double v = batch.values(i, tau);
    if (v == 0.0) continue;
    const double rest = best_excluding(tops[tau], i, -1);
    acc += std::max(rest, up * v) - 2.0 * std::max(rest, beta[i] * v) + std::max(rest, down * v);
  }
  return batch.supply_weight * acc / (4.0 * epsilon * epsilon);
}

double barrier_diagonal(double budget, double beta, double epsilon) {
  const double r = 2.0 * epsilon / beta;
  return -budget * (std::log1p(r) + std::log1p(-r)) / (4.0 * epsilon * epsilon);
}

}  // namespace

HessianDiagonal numerical_hessian_diagonal(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                           const Eigen::VectorXd& beta, double epsilon) {
  check_stencil_inputs(batch, budgets, beta, epsilon);
  const int n = batch.n();
  const std::vector<TopBids> tops = top_bids(batch, beta);
  HessianDiagonal diag;
  diag.price_part = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  diag.barrier_part = diag.price_part;
  diag.valid.assign(n, false);
  for (int i = 0; i < n; ++i) {
    if (!(beta[i] - 2.0 * epsilon > 0.0)) continue;
    diag.valid[i] = true;
    diag.price_part[i] = price_diagonal(batch, tops, beta, epsilon, i);
    diag.barrier_part[i] = barrier_diagonal(budgets[i], beta[i], epsilon);
  }
  return diag;
}

HessianParts numerical_hessian_parts(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                     const Eigen::VectorXd& beta, double epsilon) {
  check_stencil_inputs(batch, budgets, beta, epsilon);
  const int n = batch.n(), t = batch.t();
  for (int i = 0; i < n; ++i)
    if (!(beta[i] - 2.0 * epsilon > 0.0))
      throw DomainError("numerical_hessian: beta_" + std::to_string(i) +
                        " - 2 epsilon <= 0; use a smaller epsilon");

  const std::vector<TopBids> tops = top_bids(batch, beta);
  HessianParts parts;
  parts.price_part = Eigen::MatrixXd::Zero(n, n);
  parts.barrier_part = Eigen::MatrixXd::Zero(n, n);
  const double scale = batch.supply_weight / (4.0 * epsilon * epsilon);
  for (int i = 0; i < n; ++i) {
    parts.price_part(i, i) = price_diagonal(batch, tops, beta, epsilon, i);
    parts.barrier_part(i, i) = barrier_diagonal(budgets[i], beta[i], epsilon);
    for (int j = i + 1; j < n; ++j) {
      double cross = 0.0;
      for (int tau = 0; tau < t; ++tau) {
        const double vi = batch.values(i, tau), vj = batch.values(j, tau);
        if (vi == 0.0 && vj == 0.0) continue;
        const double rest = best_excluding(tops[tau], i, j);
        const double hi_i = (beta[i] + epsilon) * vi, lo_i = (beta[i] - epsilon) * vi;
        const double hi_j = (beta[j] + epsilon) * vj, lo_j = (beta[j] - epsilon) * vj;
        cross += std::max({rest, hi_i, hi_j}) - std::max({rest, hi_i, lo_j}) -
                 std::max({rest, lo_i, hi_j}) + std::max({rest, lo_i, lo_j});
      }
      parts.price_part(i, j) = parts.price_part(j, i) = scale * cross;
    }
  }
  return parts;
}

Eigen::MatrixXd numerical_hessian(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                  const Eigen::VectorXd& beta, double epsilon) {
  const Eigen::MatrixXd h = numerical_hessian_parts(batch, budgets, beta, epsilon).total();
  return 0.5 * (h + h.transpose());
}

Eigen::MatrixXd projected_hessian_pinv(const Eigen::MatrixXd& hessian,
                                       const Eigen::VectorXi& indicator) {
  const Eigen::Index n = hessian.rows();
  if (hessian.cols() != n || indicator.size() != n)
    throw ArgumentError("projected_hessian_pinv: dimension mismatch");
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i)
    if (indicator[i] != 0) idx.push_back(i);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  if (idx.empty()) return out;

  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd block(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) block(a, b) = hessian(idx[a], idx[b]);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
  const double smax = svd.singularValues()(0), smin = svd.singularValues()(k - 1);
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!std::isfinite(cond) || cond > 1e14)
    throw NumericalError("projected Hessian block is singular (condition number " +
                             std::to_string(cond) + ")",
                         cond);
  const Eigen::MatrixXd inv = block.partialPivLu().inverse();
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) out(idx[a], idx[b]) = inv(a, b);
  return out;
}

InfluenceEstimates influence_estimates(const EquilibriumSolution& eqsol, const ItemBatch& batch,
                                       const Eigen::MatrixXd& projected_pinv) {
  const int n = batch.n(), t = batch.t();
  if (eqsol.beta.size() != n || eqsol.allocation.cols() != t || projected_pinv.rows() != n)
    throw ArgumentError("influence_estimates: dimension mismatch");
  Eigen::MatrixXd centered = eqsol.allocation.cwiseProduct(batch.values);
  centered.colwise() -= eqsol.item_utility;
  InfluenceEstimates inf;
  inf.dbeta = -projected_pinv * centered;
  inf.drev = (eqsol.prices.array() - eqsol.revenue).matrix() + inf.dbeta.transpose() * eqsol.item_utility;
  return inf;
}

CovarianceEstimates plugin_covariances(const InfluenceEstimates& influence,
                                       const EquilibriumSolution& eqsol, const ItemBatch& batch,
                                       const Eigen::MatrixXd& hessian,
                                       const Eigen::MatrixXd& projected_pinv,
                                       const Eigen::VectorXd& budgets) {
  const int n = batch.n();
  const double inv_t = 1.0 / static_cast<double>(batch.t());
  CovarianceEstimates cov;
  cov.sigma_beta = inv_t * influence.dbeta * influence.dbeta.transpose();
  cov.sigma_beta = 0.5 * (cov.sigma_beta + cov.sigma_beta.transpose());
  cov.var_rev = inv_t * influence.drev.squaredNorm();

  const Eigen::VectorXd utility = budgets.cwiseQuotient(eqsol.beta);
  const Eigen::VectorXd slope = utility.cwiseQuotient(eqsol.beta);
  cov.sigma_u = slope.asDiagonal() * cov.sigma_beta * slope.asDiagonal();
  cov.var_nsw = std::max(0.0, utility.dot(cov.sigma_beta * utility));

  Eigen::MatrixXd centered = eqsol.allocation.cwiseProduct(batch.values);
  centered.colwise() -= eqsol.item_utility;
  const Eigen::MatrixXd omega = inv_t * centered * centered.transpose();
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(n, n) - hessian * projected_pinv;
  cov.sigma_delta = proj * omega * proj.transpose();
  cov.sigma_delta = 0.5 * (cov.sigma_delta + cov.sigma_delta.transpose());
  return cov;
}

Interval confidence_interval_rev(const EquilibriumSolution& eqsol, double var_rev, int t,
                                 double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (t < 1) throw ArgumentError("confidence interval needs t >= 1");
  if (!(var_rev >= 0.0)) throw ConsistencyError("negative revenue variance estimate");
  const double half = stats::normal_quantile(1.0 - alpha / 2.0) * std::sqrt(var_rev / t);
  return {eqsol.revenue - half, eqsol.revenue + half};
}

ConfidenceRegion confidence_region_beta(const Eigen::VectorXd& beta,
                                        const Eigen::MatrixXd& sigma_beta, int t, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (t < 1) throw ArgumentError("confidence region needs t >= 1");
  ConfidenceRegion cr;
  cr.center = beta;
  cr.shape = sigma_beta;
  cr.radius = std::sqrt(stats::chi2_quantile(1.0 - alpha, static_cast<int>(beta.size())) / t);
  return cr;
}

InferenceReport infer(const EquilibriumSolution& eqsol, const ItemBatch& batch,
                      const Eigen::VectorXd& budgets, double alpha, double d) {
  if (!(d > 0.0 && d < 0.5)) throw ArgumentError("smoothing exponent d must lie in (0, 0.5)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  const int t = batch.t();
  if (std::abs(batch.supply_weight * t - 1.0) > 1e-12)
    throw ArgumentError("infer expects supply weight 1/t (rescale the market first)");

  InferenceReport rep;
  rep.t = t;
  rep.d = d;
  rep.alpha = alpha;
  rep.epsilon = std::pow(static_cast<double>(t), -d);
  rep.active_indicator = estimate_active_set(eqsol.beta, rep.epsilon);
  rep.hessian = numerical_hessian(batch, budgets, eqsol.beta, rep.epsilon);
  rep.projected_pinv = projected_hessian_pinv(rep.hessian, rep.active_indicator);
  const InfluenceEstimates inf = influence_estimates(eqsol, batch, rep.projected_pinv);
  const CovarianceEstimates cov =
      plugin_covariances(inf, eqsol, batch, rep.hessian, rep.projected_pinv, budgets);
  rep.sigma_beta = cov.sigma_beta;
  rep.sigma_u = cov.sigma_u;
  rep.sigma_delta = cov.sigma_delta;
  rep.var_rev = cov.var_rev;
  rep.var_nsw = cov.var_nsw;
  rep.ci_rev = confidence_interval_rev(eqsol, rep.var_rev, t, alpha);
  rep.cr_beta = confidence_region_beta(eqsol.beta, rep.sigma_beta, t, alpha);
  return rep;
}

}  // namespace fppe
