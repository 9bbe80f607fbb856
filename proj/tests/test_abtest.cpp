#include <doctest.h>

#include <cmath>
#include <vector>

#include "fppe/abtest.hpp"
#include "fppe/errors.hpp"
#include "fppe/stats.hpp"
#include "test_util.hpp"

using namespace fppe;
using fppe::testing::vec;

TEST_CASE("constant single-buyer markets give an exact effect") {
  ABDesign design(0.5, 50, 3, vec({2.0}), ValueDistribution::constant(vec({1.0})),
                  ValueDistribution::constant(vec({1.5})));
  const auto r = run_ab_experiment(design);
  CHECK(r.arm0.analyzed.beta[0] == 1.0);
  CHECK(r.arm1.analyzed.beta[0] == 1.0);
  CHECK(r.tau_rev == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.arm0.report.var_rev == doctest::Approx(0.0));
  CHECK(r.arm1.report.var_rev == doctest::Approx(0.0));
  const auto ci = treatment_effect_ci(r, 0.1);
  CHECK(ci.rev.width() < 1e-12);
  CHECK(decide(ci.rev) == Decision::increase);
}

TEST_CASE("assignment is reproducible and roughly binomial") {
  const Eigen::VectorXd b = vec({0.4, 0.8});
  auto run = [&](std::uint64_t seed) {
    ABDesign d(0.3, 100, seed, b, ValueDistribution::uniform(2), ValueDistribution::uniform(2));
    return run_ab_experiment(d);
  };
  const auto a = run(17);
  const auto c = run(17);
  CHECK(a.t1 == c.t1);
  CHECK(a.assignment == c.assignment);
  CHECK(a.t0 + a.t1 == 100);
  // 3 sd of Binomial(100, 0.3) is 13.7.
  CHECK(std::abs(a.t1 - 30) <= 14);
  CHECK(run(18).assignment != a.assignment);
}

TEST_CASE("arm markets follow the budget split") {
  const Eigen::VectorXd b = vec({0.3, 0.6, 1.4});
  ABDesign d(0.4, 120, 5, b, ValueDistribution::uniform(3), ValueDistribution::exponential(3, 2.0));
  const auto r = run_ab_experiment(d);
  CHECK((r.arm1.observed_budgets + r.arm0.observed_budgets - b).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(r.arm1.observed_budgets.isApprox(0.4 * b));
  CHECK(r.arm1.observed_batch.supply_weight == doctest::Approx(0.4 / r.t1));
  CHECK(r.arm0.observed_batch.supply_weight == doctest::Approx(0.6 / r.t0));
  CHECK(r.arm1.analyzed_batch.supply_weight == doctest::Approx(1.0 / r.t1));

  SUBCASE("rescaled arm has the same equilibrium") {
    for (const ArmResult* arm : {&r.arm0, &r.arm1}) {
      const auto direct = solve_fppe(arm->analyzed_batch, b);
      CHECK((direct.beta - arm->observed.beta).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((direct.beta - arm->analyzed.beta).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(direct.revenue - arm->analyzed.revenue) < 1e-9);
    }
    CHECK(r.tau_rev == r.arm1.analyzed.revenue - r.arm0.analyzed.revenue);
  }
  SUBCASE("each arm can be reproduced alone") {
    const auto again = solve_fppe(r.arm1.observed_batch, r.arm1.observed_budgets);
    CHECK(again.beta == r.arm1.observed.beta);
  }
}

TEST_CASE("empty arms are an experiment error") {
  int errors = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ABDesign d(0.05, 2, seed, vec({0.5}), ValueDistribution::uniform(1), ValueDistribution::uniform(1));
    try {
      run_ab_experiment(d);
    } catch (const ExperimentError&) {
      ++errors;
    } catch (const ArgumentError&) {
      // a one-item arm has epsilon = 1 and cannot be analyzed
    }
  }
  CHECK(errors > 40);
}

TEST_CASE("design validation") {
  const auto u = ValueDistribution::uniform(2);
  CHECK_THROWS_AS(ABDesign(0.0, 10, 1, vec({0.5, 0.5}), u, u), ArgumentError);
  CHECK_THROWS_AS(ABDesign(1.0, 10, 1, vec({0.5, 0.5}), u, u), ArgumentError);
  CHECK_THROWS_AS(ABDesign(0.5, 10, 1, vec({0.5}), u, u), ArgumentError);
  CHECK_THROWS_AS(ABDesign(0.5, 10, 1, vec({0.5, 0.5}), u, ValueDistribution::uniform(3)), ArgumentError);
}

TEST_CASE("treatment effect interval") {
  const Interval ci = treatment_effect_interval(0.0, 1.0, 1.0, 0.5, 400, 0.1);
  CHECK(ci.upper == doctest::Approx(0.16449).epsilon(1e-4));
  CHECK(ci.lower == doctest::Approx(-0.16449).epsilon(1e-4));
  const Interval point = treatment_effect_interval(0.2, 0.0, 0.0, 0.3, 50, 0.1);
  CHECK(point.lower == 0.2);
  CHECK(point.upper == 0.2);
  CHECK_THROWS_AS(treatment_effect_interval(0.0, -1.0, 1.0, 0.5, 400, 0.1), ConsistencyError);
}

TEST_CASE("decisions") {
  CHECK(decide({0.1, 0.3}) == Decision::increase);
  CHECK(decide({-0.3, -0.1}) == Decision::decrease);
  CHECK(decide({-0.1, 0.2}) == Decision::undecided);
  CHECK(std::string(to_string(Decision::undecided)) == "undecided");
}

TEST_CASE("null treatment: unbiased effect and nominal coverage") {
  const int n = 30, t = 200, trials = 100;
  const Eigen::VectorXd b = leftover_budget_scheme(n, 0.3, 77);
  const auto u = ValueDistribution::uniform(n);
  std::vector<double> taus;
  int covered = 0;
  for (int k = 0; k < trials; ++k) {
    ABDesign d(0.5, t, 5000 + k, b, u, u);
    try {
      const auto r = run_ab_experiment(d);
      taus.push_back(r.tau_rev);
      covered += treatment_effect_ci(r, 0.1).rev.contains(0.0) ? 1 : 0;
    } catch (const DomainError&) {
    }
  }
  REQUIRE(taus.size() >= 90);
  const double se = std::sqrt(stats::variance(taus) / taus.size());
  CHECK(std::abs(stats::mean(taus)) < 3.0 * se);
  const double rate = static_cast<double>(covered) / taus.size();
  CHECK(rate >= 0.84);
  CHECK(rate <= 0.96);
}
