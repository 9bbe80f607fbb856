#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fppe/errors.hpp"
#include "fppe/inference.hpp"
#include "fppe/solver.hpp"
#include "fppe/stats.hpp"
#include "test_util.hpp"

using namespace fppe;
using fppe::testing::make_batch;
using fppe::testing::vec;

namespace {

// Direct evaluation of H_t, independent of the library objective.
double objective(double b1, double b2, const ItemBatch& batch, const Eigen::VectorXd& budgets) {
  double f = 0.0;
  for (int tau = 0; tau < batch.t(); ++tau)
    f += std::max(b1 * batch.values(0, tau), b2 * batch.values(1, tau));
  return batch.supply_weight * f - budgets[0] * std::log(b1) - budgets[1] * std::log(b2);
}

double grid_minimum(const ItemBatch& batch, const Eigen::VectorXd& budgets) {
  double best = INFINITY;
  for (int i = 1; i <= 1000; ++i)
    for (int j = 1; j <= 1000; ++j) best = std::min(best, objective(i * 1e-3, j * 1e-3, batch, budgets));
  return best;
}

void check_invariants(const EquilibriumSolution& s, const ItemBatch& batch, const Eigen::VectorXd& b,
                      double tol) {
  const int n = batch.n(), t = batch.t();
  const double sigma = batch.supply_weight;
  double psi = 0.0, sum_blogb = 0.0;
  for (int i = 0; i < n; ++i) {
    CHECK(s.beta[i] > 0.0);
    CHECK(s.beta[i] <= 1.0);
    CHECK(std::abs(s.total_utility[i] - b[i] / s.beta[i]) <= tol * (1.0 + b[i] / s.beta[i]));
    CHECK(std::abs(s.total_utility[i] - s.item_utility[i] - s.leftover[i]) <= tol);
    double spend = 0.0, mu = 0.0;
    for (int tau = 0; tau < t; ++tau) {
      spend += sigma * s.allocation(i, tau) * s.prices[tau];
      mu += sigma * s.allocation(i, tau) * batch.values(i, tau);
    }
    CHECK(spend <= b[i] + tol);
    CHECK(std::abs(b[i] - spend - s.leftover[i]) <= tol);
    CHECK(std::abs(mu - s.item_utility[i]) <= tol);
    CHECK(s.leftover[i] >= -tol);
    if (s.leftover[i] > tol) CHECK(s.beta[i] == 1.0);
    psi -= b[i] * std::log(s.beta[i]);
    sum_blogb += b[i] * std::log(b[i]);
  }
  double rev = 0.0;
  for (int tau = 0; tau < t; ++tau) {
    double top = 0.0, share = 0.0;
    for (int i = 0; i < n; ++i) {
      top = std::max(top, s.beta[i] * batch.values(i, tau));
      share += s.allocation(i, tau);
      CHECK(s.allocation(i, tau) >= -tol);
    }
    CHECK(std::abs(s.prices[tau] - top) <= tol);
    CHECK(share <= 1.0 + tol);
    if (s.prices[tau] > tol) CHECK(std::abs(share - 1.0) <= tol);
    for (int i = 0; i < n; ++i)
      if (s.allocation(i, tau) > tol) CHECK(s.beta[i] * batch.values(i, tau) >= top - tol);
    rev += sigma * s.prices[tau];
  }
  CHECK(std::abs(s.revenue - rev) <= tol);
  CHECK(s.revenue <= b.sum() + tol);
  CHECK(std::abs(s.nsw - (psi + sum_blogb)) <= tol);
}

}  // namespace

TEST_CASE("single buyer closed forms") {
  const auto batch = make_batch(Eigen::MatrixXd::Ones(1, 1), 1.0);
  SUBCASE("paced buyer b = 0.5") {
    const auto s = solve_fppe(batch, vec({0.5}));
    CHECK(std::abs(s.beta[0] - 0.5) < 1e-9);
    CHECK(std::abs(s.revenue - 0.5) < 1e-9);
    CHECK(std::abs(s.total_utility[0] - 1.0) < 1e-9);
    CHECK(std::abs(s.leftover[0]) < 1e-9);
    CHECK(std::abs(s.nsw) < 1e-9);
  }
  SUBCASE("unpaced buyer b = 2") {
    const auto s = solve_fppe(batch, vec({2.0}));
    CHECK(s.beta[0] == 1.0);
    CHECK(std::abs(s.revenue - 1.0) < 1e-9);
    CHECK(std::abs(s.leftover[0] - 1.0) < 1e-9);
    CHECK(std::abs(s.total_utility[0] - 2.0) < 1e-9);
    CHECK(std::abs(s.nsw - 2.0 * std::log(2.0)) < 1e-9);
  }
}

TEST_CASE("separable two-buyer market") {
  const auto batch = make_batch((Eigen::MatrixXd(2, 2) << 1, 0, 0, 1).finished(), 0.5);
  const Eigen::VectorXd b = vec({0.25, 0.25});
  const Eigen::VectorXd beta = solve_dual_eg(batch, b);
  CHECK(std::abs(beta[0] - 0.5) < 1e-9);
  CHECK(std::abs(beta[1] - 0.5) < 1e-9);
  CHECK(objective(beta[0], beta[1], batch, b) <= grid_minimum(batch, b) + 1e-6);
}

TEST_CASE("symmetric tie splits the item evenly") {
  const auto batch = make_batch(Eigen::MatrixXd::Ones(2, 1), 1.0);
  const Eigen::VectorXd b = vec({0.3, 0.3});
  const auto s = solve_fppe(batch, b);
  CHECK(std::abs(s.beta[0] - 0.6) < 1e-6);
  CHECK(std::abs(s.beta[1] - 0.6) < 1e-6);
  CHECK(std::abs(s.allocation(0, 0) - 0.5) < 1e-6);
  CHECK(std::abs(s.allocation(1, 0) - 0.5) < 1e-6);
  CHECK(objective(s.beta[0], s.beta[1], batch, b) <= grid_minimum(batch, b) + 1e-6);

  const auto a = recover_allocation(vec({0.6, 0.6}), batch, b);
  CHECK(a.prices[0] == doctest::Approx(0.6));
  CHECK(a.allocation(0, 0) == doctest::Approx(0.5));
  CHECK(a.allocation(1, 0) == doctest::Approx(0.5));
  CHECK(std::abs(a.leftover[0]) < 1e-12);
  CHECK(std::abs(a.leftover[1]) < 1e-12);
}

TEST_CASE("recover_allocation on untied and empty items") {
  const auto batch = make_batch((Eigen::MatrixXd(2, 2) << 0.9, 0.0, 0.3, 0.0).finished(), 0.5);
  const auto a = recover_allocation(vec({1.0, 1.0}), batch, vec({1.0, 1.0}));
  CHECK(a.prices[0] == doctest::Approx(0.9));
  CHECK(a.allocation(0, 0) == 1.0);
  CHECK(a.allocation(1, 0) == 0.0);
  CHECK(a.prices[1] == 0.0);
  CHECK(a.allocation.col(1).isZero());
}

TEST_CASE("recover_allocation rejects an unconverged beta") {
  const auto batch = make_batch(Eigen::MatrixXd::Ones(1, 1), 1.0);
  // beta = 0.2 spends 0.2 < b = 0.5 although the buyer is paced.
  CHECK_THROWS_AS(recover_allocation(vec({0.2}), batch, vec({0.5})), ConsistencyError);
}

TEST_CASE("grid oracle on random two-buyer markets") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const int t = 1 + static_cast<int>(rng.uniform() * 5);
    Eigen::MatrixXd v(2, t);
    for (int k = 0; k < v.size(); ++k) v.data()[k] = rng.uniform();
    const auto batch = make_batch(v);
    const Eigen::VectorXd b = vec({0.05 + rng.uniform(), 0.05 + rng.uniform()});
    const Eigen::VectorXd beta = solve_dual_eg(batch, b);
    CAPTURE(seed);
    CHECK(objective(beta[0], beta[1], batch, b) <= grid_minimum(batch, b) + 1e-6);
  }
}

TEST_CASE("KKT certificate and invariants on random markets") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto inst = fppe::testing::random_instance(seed, 30, 500);
    CAPTURE(seed);
    const auto s = solve_fppe(inst.batch, inst.budgets);
    CHECK(s.kkt_residual <= 1e-9);
    CHECK(kkt_residual(s.beta, s.allocation, inst.batch, inst.budgets) <= 1e-9);
    check_invariants(s, inst.batch, inst.budgets, 1e-6);
  }
}

TEST_CASE("revenue equals total budget when every buyer is paced") {
  int paced_cases = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    const int n = 2 + static_cast<int>(rng.uniform() * 8);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b[i] = 0.01 + 0.1 * rng.uniform() / n;
    const MarketDefinition m(b, ValueDistribution::uniform(n));
    const auto batch = sample_items(m, 200, seed);
    const auto s = solve_fppe(batch, b);
    if ((s.beta.array() < 1.0).all()) {
      ++paced_cases;
      CHECK(std::abs(s.revenue - b.sum()) <= 1e-8);
    }
  }
  CHECK(paced_cases > 30);
}

TEST_CASE("kkt_residual measures the optimality conditions") {
  const auto batch = make_batch(Eigen::MatrixXd::Ones(1, 1), 1.0);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 1);
  CHECK(kkt_residual(vec({0.5}), x, batch, vec({0.5})) == doctest::Approx(0.0));
  // Paced buyer at beta = 0.25: g = 1 - 0.5 / 0.25 = -1.
  CHECK(kkt_residual(vec({0.25}), x, batch, vec({0.5})) == doctest::Approx(1.0));
  // Capped buyer with g = 1 - 2 < 0 is optimal.
  CHECK(kkt_residual(vec({1.0}), x, batch, vec({2.0})) == doctest::Approx(0.0));
  // Capped buyer with g = 1 - 0.5 > 0 is not.
  CHECK(kkt_residual(vec({1.0}), x, batch, vec({0.5})) == doctest::Approx(0.5));
}

TEST_CASE("interior identity p = mu_bar H^-1 mu(theta)") {
  const Eigen::VectorXd b = vec({0.1, 0.15, 0.2});
  const MarketDefinition m(b, ValueDistribution::uniform(3));
  const int t = 2000;
  const auto batch = sample_items(m, t, 17);
  const auto s = solve_fppe(batch, b);
  REQUIRE((s.beta.array() < 1.0).all());
  const Eigen::MatrixXd h = numerical_hessian(batch, b, s.beta, std::pow(t, -0.4));
  const Eigen::VectorXd w = h.ldlt().solve(s.item_utility);
  std::vector<double> dev(t);
  for (int tau = 0; tau < t; ++tau) {
    const Eigen::VectorXd mu = s.allocation.col(tau).cwiseProduct(batch.values.col(tau));
    dev[tau] = std::abs(s.prices[tau] - w.dot(mu));
  }
  CHECK(stats::median(dev) < 0.05);
}

TEST_CASE("solver input validation") {
  const auto batch = make_batch(Eigen::MatrixXd::Ones(2, 1), 1.0);
  CHECK_THROWS_AS(solve_dual_eg(batch, vec({0.3})), ArgumentError);
  CHECK_THROWS_AS(solve_dual_eg(batch, vec({0.3, 0.0})), ArgumentError);
  SolverConfig cfg;
  cfg.kkt_tolerance = 0.0;
  CHECK_THROWS_AS(solve_dual_eg(batch, vec({0.3, 0.3}), cfg), ArgumentError);
}

TEST_CASE("iteration budget exhaustion raises a solver error") {
  const auto inst = fppe::testing::random_instance(5, 20, 300);
  SolverConfig cfg;
  cfg.max_iterations = 1;
  cfg.refinement = false;
  try {
    solve_dual_eg(inst.batch, inst.budgets, cfg);
    FAIL("expected a SolverError");
  } catch (const SolverError& e) {
    CHECK(e.last_residual() > cfg.kkt_tolerance);
  }
}
