#include <doctest.h>

#include <cmath>

#include "fppe/errors.hpp"
#include "fppe/experiments.hpp"
#include "fppe/solver.hpp"
#include "test_util.hpp"

using namespace fppe;
using fppe::testing::vec;

TEST_CASE("dual averaging oracle") {
  SUBCASE("single constant buyer") {
    const MarketDefinition m(vec({0.5}), ValueDistribution::constant(vec({1.0})));
    CHECK(std::abs(solve_limit_dual_averaging(m, 1000000, 1)[0] - 0.5) < 0.01);
  }
  SUBCASE("zero values leave beta at 1") {
    const MarketDefinition m(vec({0.5, 0.3}), ValueDistribution::constant(vec({0.0, 0.0})));
    const Eigen::VectorXd beta = solve_limit_dual_averaging(m, 1000, 1);
    CHECK(beta[0] == doctest::Approx(1.0));
    CHECK(beta[1] == doctest::Approx(1.0));
  }
  SUBCASE("agrees with a large sample solve") {
    const Eigen::VectorXd b = vec({0.1, 0.3});
    const MarketDefinition m(b, ValueDistribution::uniform(vec({0.0, 0.5}), vec({0.5, 1.0})));
    const Eigen::VectorXd da = solve_limit_dual_averaging(m, 1000000, 2);
    const Eigen::VectorXd eg = solve_dual_eg(sample_items(m, 1000000, 3), b);
    CHECK((da - eg).cwiseAbs().maxCoeff() < 0.005);
  }
  SUBCASE("limit revenue of a constant market") {
    const MarketDefinition m(vec({0.5}), ValueDistribution::constant(vec({1.0})));
    CHECK(limit_revenue(m, vec({0.5}), 1000, 4) == doctest::Approx(0.5));
  }
}

TEST_CASE("ground truth runs agree and reject disagreement") {
  const Eigen::VectorXd b = vec({0.1, 0.2, 0.15});
  const MarketDefinition m(b, ValueDistribution::uniform(3));
  const GroundTruth gt = compute_ground_truth(m, 5, 200000, 200000, 0.01);
  CHECK(gt.discrepancy <= 0.01);
  CHECK((gt.beta - gt.beta_check).cwiseAbs().maxCoeff() == doctest::Approx(gt.discrepancy));
  // All three buyers are paced, so the limit revenue is the total budget.
  CHECK(std::abs(gt.revenue - b.sum()) < 0.01);
  CHECK_THROWS_AS(compute_ground_truth(m, 5, 10, 1000, 1e-9), ExperimentError);
}
