#include <cmath>
#include <string>

#include "fppe/errors.hpp"
#include "fppe/solver.hpp"

namespace fppe {

namespace {

void check_shapes(const Eigen::VectorXd& beta, const ItemBatch& batch, const Eigen::VectorXd& budgets) {
  if (batch.t() < 1) throw ArgumentError("empty item batch");
  if (beta.size() != batch.n() || budgets.size() != batch.n())
    throw ArgumentError("beta, budgets and batch disagree on buyer count");
}

}  // namespace

ObjectiveValue dual_eg_objective(const Eigen::VectorXd& beta, const ItemBatch& batch,
                                 const Eigen::VectorXd& budgets) {
  check_shapes(beta, batch, budgets);
  const int n = batch.n();
  for (int i = 0; i < n; ++i)
    if (!(beta[i] > 0.0)) throw DomainError("dual EG objective needs beta_i > 0 (buyer " + std::to_string(i) + ")");

  ObjectiveValue out;
  out.subgradient = Eigen::VectorXd::Zero(n);
  double price_sum = 0.0;
  for (int tau = 0; tau < batch.t(); ++tau) {
    int winner = 0;
    double best = beta[0] * batch.values(0, tau);
    for (int i = 1; i < n; ++i) {
      const double bid = beta[i] * batch.values(i, tau);
      if (bid > best) {
        best = bid;
        winner = i;
      }
    }
    price_sum += best;
    out.subgradient[winner] += batch.values(winner, tau);
  }
  out.subgradient *= batch.supply_weight;
  double psi = 0.0;
  for (int i = 0; i < n; ++i) {
    psi -= budgets[i] * std::log(beta[i]);
    out.subgradient[i] -= budgets[i] / beta[i];
  }
  out.value = batch.supply_weight * price_sum + psi;
  return out;
}

double kkt_residual(const Eigen::VectorXd& beta, const Eigen::MatrixXd& allocation,
                    const ItemBatch& batch, const Eigen::VectorXd& budgets) {
  check_shapes(beta, batch, budgets);
  double residual = 0.0;
  for (int i = 0; i < batch.n(); ++i) {
    const double mu = batch.supply_weight * allocation.row(i).dot(batch.values.row(i));
    const double g = mu - budgets[i] / beta[i];
    residual = std::max(residual, beta[i] < 1.0 ? std::abs(g) : std::max(0.0, g));
  }
  return residual;
}

}  // namespace fppe
