#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fppe/market.hpp"
#include "fppe/solver.hpp"

namespace fppe {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double x) const noexcept { return lower <= x && x <= upper; }
  double width() const noexcept { return upper - lower; }
};

/// {center + radius * shape^{1/2} w : |w| <= 1}.
struct ConfidenceRegion {
  Eigen::VectorXd center;
  Eigen::MatrixXd shape;
  double radius = 0.0;

  /// Membership through the minimum-norm preimage under shape^{1/2}.
  /// Displacements along null directions of `shape` must vanish (|.| <= 1e-9).
  bool contains(const Eigen::VectorXd& point) const;
};

struct InferenceReport {
  Eigen::VectorXi active_indicator;  // 1 iff beta_i < 1 - epsilon (paced buyer)
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd projected_pinv;
  Eigen::MatrixXd sigma_beta;
  Eigen::MatrixXd sigma_u;
  Eigen::MatrixXd sigma_delta;
  double var_rev = 0.0;
  double var_nsw = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  int t = 0;
  Interval ci_rev;
  ConfidenceRegion cr_beta;
};

Eigen::VectorXi estimate_active_set(const Eigen::VectorXd& beta, double epsilon);

/// Four-point central difference of H_t, split into the piecewise-linear
/// price term and the log-barrier term. The full estimate is their sum.
struct HessianParts {
  Eigen::MatrixXd price_part;
  Eigen::MatrixXd barrier_part;
  Eigen::MatrixXd total() const { return price_part + barrier_part; }
};

HessianParts numerical_hessian_parts(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                     const Eigen::VectorXd& beta, double epsilon);

/// Diagonal stencil entries computed one buyer at a time; entries with
/// beta_i - 2 epsilon <= 0 are flagged instead of raising.
struct HessianDiagonal {
  Eigen::VectorXd price_part;
  Eigen::VectorXd barrier_part;
  std::vector<bool> valid;
};

HessianDiagonal numerical_hessian_diagonal(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                           const Eigen::VectorXd& beta, double epsilon);

/// Symmetric four-point estimate of the Hessian of H_t at beta. The formula
/// is evaluated as is above beta = 1; requires beta_i - 2 epsilon > 0.
Eigen::MatrixXd numerical_hessian(const ItemBatch& batch, const Eigen::VectorXd& budgets,
                                  const Eigen::VectorXd& beta, double epsilon);

/// (P H P)^+ via the inverse of the block on indices with indicator 1.
Eigen::MatrixXd projected_hessian_pinv(const Eigen::MatrixXd& hessian,
                                       const Eigen::VectorXi& indicator);

struct InfluenceEstimates {
  Eigen::MatrixXd dbeta;  // n x t
  Eigen::VectorXd drev;   // t
};

InfluenceEstimates influence_estimates(const EquilibriumSolution& eqsol, const ItemBatch& batch,
                                       const Eigen::MatrixXd& projected_pinv);

struct CovarianceEstimates {
  Eigen::MatrixXd sigma_beta;
  Eigen::MatrixXd sigma_u;
  Eigen::MatrixXd sigma_delta;
  double var_rev = 0.0;
  double var_nsw = 0.0;
};

CovarianceEstimates plugin_covariances(const InfluenceEstimates& influence,
                                       const EquilibriumSolution& eqsol, const ItemBatch& batch,
                                       const Eigen::MatrixXd& hessian,
                                       const Eigen::MatrixXd& projected_pinv,
                                       const Eigen::VectorXd& budgets);

/// REV +- z_{1 - alpha/2} sqrt(var_rev / t).
Interval confidence_interval_rev(const EquilibriumSolution& eqsol, double var_rev, int t,
                                 double alpha);

/// Radius sqrt(chi2_{n, 1-alpha} / t) around beta with shape sigma_beta.
ConfidenceRegion confidence_region_beta(const Eigen::VectorXd& beta,
                                        const Eigen::MatrixXd& sigma_beta, int t, double alpha);

/// Full pipeline with epsilon = t^{-d}. The batch must carry supply weight 1/t.
InferenceReport infer(const EquilibriumSolution& eqsol, const ItemBatch& batch,
                      const Eigen::VectorXd& budgets, double alpha, double d = 0.4);

}  // namespace fppe
