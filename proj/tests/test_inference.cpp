#include <doctest.h>

#include <cmath>

#include "fppe/errors.hpp"
#include "fppe/inference.hpp"
#include "fppe/solver.hpp"
#include "fppe/stats.hpp"
#include "test_util.hpp"

using namespace fppe;
using fppe::testing::make_batch;
using fppe::testing::vec;

TEST_CASE("active set threshold") {
  CHECK(estimate_active_set(vec({1.0}), 0.1)[0] == 0);
  CHECK(estimate_active_set(vec({0.5}), 0.1)[0] == 1);
  CHECK(estimate_active_set(vec({0.95}), 0.1)[0] == 0);
  CHECK_THROWS_AS(estimate_active_set(vec({0.5}), 0.0), ArgumentError);
}

TEST_CASE("barrier-only Hessian") {
  const auto zero = make_batch(Eigen::MatrixXd::Zero(1, 5));
  const Eigen::MatrixXd h = numerical_hessian(zero, vec({0.5}), vec({0.5}), 0.01);
  // The diagonal stencil steps by 2 eps: -b log(1 - (2 eps / beta)^2) / (4 eps^2),
  // which is b / beta^2 + 2 b eps^2 / beta^4 + ... = 2.0016.
  CHECK(h(0, 0) == doctest::Approx(-0.5 * std::log(1.0 - 0.04 * 0.04) / 4e-4).epsilon(1e-9));
  CHECK(std::abs(h(0, 0) - 2.0) < 2e-3);
}

TEST_CASE("Hessian error is second order in epsilon") {
  const Eigen::VectorXd b = vec({0.5, 0.2, 1.0});
  const Eigen::VectorXd beta = vec({0.5, 0.3, 0.9});
  const auto zero = make_batch(Eigen::MatrixXd::Zero(3, 4));
  Eigen::MatrixXd exact = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 3; ++i) exact(i, i) = b[i] / (beta[i] * beta[i]);
  auto err = [&](double eps) {
    return (numerical_hessian(zero, b, beta, eps) - exact).cwiseAbs().maxCoeff();
  };
  for (double eps : {0.04, 0.02, 0.01}) {
    CAPTURE(eps);
    CHECK(err(eps) / err(eps / 2.0) >= 3.5);
  }
}

TEST_CASE("price part vanishes when no winner changes inside the stencil") {
  // Each item has a single clear winner far from any tie.
  Eigen::MatrixXd v(2, 4);
  v << 1.0, 0.9, 0.1, 0.0,
       0.1, 0.0, 1.0, 0.8;
  const auto batch = make_batch(v);
  const Eigen::VectorXd b = vec({0.2, 0.3});
  const Eigen::VectorXd beta = vec({0.5, 0.6});
  const HessianParts parts = numerical_hessian_parts(batch, b, beta, 0.01);
  CHECK(parts.price_part.cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd h = parts.total();
  CHECK(std::abs(h(0, 0) - b[0] / 0.25) < 1e-3);
  CHECK(std::abs(h(1, 1) - b[1] / 0.36) < 1e-3);
  CHECK(std::abs(h(0, 1)) < 1e-9);
}

TEST_CASE("stencil leaving the log domain is an error") {
  const auto batch = make_batch(Eigen::MatrixXd::Ones(1, 2));
  CHECK_THROWS_AS(numerical_hessian(batch, vec({0.1}), vec({0.1}), 0.05), DomainError);
  const HessianDiagonal diag = numerical_hessian_diagonal(batch, vec({0.1}), vec({0.1}), 0.05);
  CHECK_FALSE(diag.valid[0]);
}

TEST_CASE("projected pseudo-inverse") {
  SUBCASE("full inverse") {
    const Eigen::MatrixXd h = vec({2.0, 4.0}).asDiagonal();
    const Eigen::MatrixXd p = projected_hessian_pinv(h, Eigen::Vector2i(1, 1));
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(1, 1) == doctest::Approx(0.25));
    CHECK(p(0, 1) == 0.0);
  }
  SUBCASE("empty block") {
    const Eigen::MatrixXd h = vec({2.0, 4.0}).asDiagonal();
    CHECK(projected_hessian_pinv(h, Eigen::Vector2i(0, 0)).isZero());
  }
  SUBCASE("one-by-one block") {
    const Eigen::MatrixXd h = (Eigen::MatrixXd(2, 2) << 2, 1, 1, 4).finished();
    const Eigen::MatrixXd p = projected_hessian_pinv(h, Eigen::Vector2i(0, 1));
    CHECK(p(0, 0) == 0.0);
    CHECK(p(0, 1) == 0.0);
    CHECK(p(1, 0) == 0.0);
    CHECK(p(1, 1) == doctest::Approx(0.25));
  }
  SUBCASE("singular block") {
    const Eigen::MatrixXd h = (Eigen::MatrixXd(2, 2) << 1, 1, 1, 1).finished();
    CHECK_THROWS_AS(projected_hessian_pinv(h, Eigen::Vector2i(1, 1)), NumericalError);
  }
}

TEST_CASE("influence estimates") {
  SUBCASE("no paced buyers: revenue influence is the centred price") {
    const auto inst = fppe::testing::random_instance(3, 5, 40);
    const auto s = solve_fppe(inst.batch, inst.budgets);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(s.beta.size(), s.beta.size());
    const auto inf = influence_estimates(s, inst.batch, zero);
    CHECK(inf.dbeta.isZero());
    for (int tau = 0; tau < inst.batch.t(); ++tau)
      CHECK(inf.drev[tau] == doctest::Approx(s.prices[tau] - s.revenue));
  }
  SUBCASE("identical items carry no revenue fluctuation") {
    const auto batch = make_batch(Eigen::MatrixXd::Constant(2, 6, 0.7));
    const Eigen::VectorXd b = vec({0.1, 0.3});
    const auto s = solve_fppe(batch, b);
    // Every item realizes x * v = mu_bar, so any pseudo-inverse gives zero.
    const auto inf = influence_estimates(s, batch, Eigen::MatrixXd::Identity(2, 2));
    CHECK(inf.dbeta.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(inf.drev.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("influences are centred") {
    const Eigen::VectorXd b = vec({0.1, 0.3});
    const MarketDefinition m(b, ValueDistribution::uniform(2));
    const auto batch = sample_items(m, 300, 8);
    const auto s = solve_fppe(batch, b);
    const auto rep = infer(s, batch, b, 0.1);
    const auto inf = influence_estimates(s, batch, rep.projected_pinv);
    CHECK(inf.dbeta.rowwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(inf.drev.mean()) < 1e-12);
  }
}

TEST_CASE("plug-in covariances with zero beta influence") {
  const auto inst = fppe::testing::random_instance(4, 4, 30);
  const auto s = solve_fppe(inst.batch, inst.budgets);
  const int n = static_cast<int>(s.beta.size());
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
  const auto inf = influence_estimates(s, inst.batch, zero);
  const auto cov = plugin_covariances(inf, s, inst.batch, zero, zero, inst.budgets);
  CHECK(cov.sigma_beta.isZero());
  CHECK(cov.sigma_u.isZero());
  CHECK(cov.var_nsw == 0.0);
  CHECK(cov.var_rev >= 0.0);
}

TEST_CASE("quantiles") {
  CHECK(stats::normal_quantile(0.95) == doctest::Approx(1.6449).epsilon(1e-4));
  CHECK(stats::chi2_quantile(0.9, 2) == doctest::Approx(4.6052).epsilon(1e-4));
  CHECK(std::sqrt(stats::chi2_quantile(0.9, 2)) == doctest::Approx(2.1460).epsilon(1e-4));
}

TEST_CASE("confidence sets") {
  const auto batch = make_batch(Eigen::MatrixXd::Ones(1, 1), 1.0);
  const auto s = solve_fppe(batch, vec({0.5}));
  SUBCASE("zero variance gives a point interval") {
    const Interval ci = confidence_interval_rev(s, 0.0, 100, 0.1);
    CHECK(ci.lower == s.revenue);
    CHECK(ci.upper == s.revenue);
    CHECK(ci.contains(s.revenue));
  }
  SUBCASE("interval half-width") {
    const Interval ci = confidence_interval_rev(s, 4.0, 400, 0.1);
    CHECK(ci.width() / 2.0 == doctest::Approx(1.6449 * 2.0 / 20.0).epsilon(1e-4));
  }
  SUBCASE("negative variance is rejected") {
    CHECK_THROWS_AS(confidence_interval_rev(s, -1e-3, 100, 0.1), ConsistencyError);
  }
  SUBCASE("zero covariance gives a point region") {
    const auto cr = confidence_region_beta(vec({0.5, 0.7}), Eigen::MatrixXd::Zero(2, 2), 100, 0.1);
    CHECK(cr.contains(vec({0.5, 0.7})));
    CHECK_FALSE(cr.contains(vec({0.5, 0.71})));
  }
  SUBCASE("region radius is the root chi-square quantile over sqrt(t)") {
    const auto cr = confidence_region_beta(vec({0.5, 0.7}), Eigen::MatrixXd::Identity(2, 2), 100, 0.1);
    CHECK(cr.radius == doctest::Approx(2.1460 / 10.0).epsilon(1e-4));
    CHECK(cr.contains(vec({0.5 + 0.21, 0.7})));
    CHECK_FALSE(cr.contains(vec({0.5 + 0.22, 0.7})));
  }
}

TEST_CASE("zero-value market has zero beta covariance") {
  const auto batch = make_batch(Eigen::MatrixXd::Zero(2, 50));
  const Eigen::VectorXd b = vec({0.4, 0.6});
  const auto s = solve_fppe(batch, b);
  CHECK((s.beta.array() == 1.0).all());
  const auto rep = infer(s, batch, b, 0.1);
  CHECK(rep.active_indicator.isZero());
  CHECK(rep.sigma_beta.isZero());
}

TEST_CASE("report invariants and stage-by-stage composition") {
  const Eigen::VectorXd b = vec({0.1, 0.2, 1.2});
  const MarketDefinition m(b, ValueDistribution::uniform(3));
  const int t = 400;
  const auto batch = sample_items(m, t, 21);
  const auto s = solve_fppe(batch, b);
  const auto rep = infer(s, batch, b, 0.1, 0.4);

  const double eps = std::pow(static_cast<double>(t), -0.4);
  CHECK(rep.epsilon == eps);
  const Eigen::VectorXi act = estimate_active_set(s.beta, eps);
  const Eigen::MatrixXd h = numerical_hessian(batch, b, s.beta, eps);
  const Eigen::MatrixXd pinv = projected_hessian_pinv(h, act);
  const auto inf = influence_estimates(s, batch, pinv);
  const auto cov = plugin_covariances(inf, s, batch, h, pinv, b);
  CHECK(rep.active_indicator == act);
  CHECK(rep.hessian == h);
  CHECK(rep.projected_pinv == pinv);
  CHECK(rep.sigma_beta == cov.sigma_beta);
  CHECK(rep.var_rev == cov.var_rev);
  CHECK(rep.var_nsw == cov.var_nsw);
  const Interval ci = confidence_interval_rev(s, cov.var_rev, t, 0.1);
  CHECK(rep.ci_rev.lower == ci.lower);
  CHECK(rep.ci_rev.upper == ci.upper);

  CHECK(rep.ci_rev.contains(s.revenue));
  CHECK(rep.var_rev >= 0.0);
  CHECK(rep.var_nsw >= 0.0);
  CHECK((rep.sigma_beta - rep.sigma_beta.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.sigma_beta);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  for (int i = 0; i < 3; ++i) {
    if (act[i]) continue;
    CHECK(rep.sigma_beta.row(i).isZero());
    CHECK(rep.sigma_beta.col(i).isZero());
  }
  CHECK_THROWS_AS(infer(s, make_batch(batch.values, 1.0), b, 0.1), ArgumentError);
}

TEST_CASE("revenue variance of a fully paced market shrinks with t") {
  const Eigen::VectorXd b = vec({0.1, 0.15, 0.2});
  const MarketDefinition m(b, ValueDistribution::uniform(3));
  double prev = INFINITY;
  for (int t : {250, 1000, 4000}) {
    const auto batch = sample_items(m, t, 6);
    const auto s = solve_fppe(batch, b);
    REQUIRE((s.beta.array() < 1.0).all());
    const double v = infer(s, batch, b, 0.1).var_rev;
    CAPTURE(t);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("beta confidence region covers the limit multiplier") {
  // Buyer 0 is paced at beta* = sqrt(0.3): it wins when beta v_0 > v_1 and
  // spends beta^2 / 3. Buyer 1 spends 0.45 < 1.5 and stays at beta* = 1.
  const Eigen::VectorXd b = vec({0.1, 1.5});
  const Eigen::VectorXd beta_star = vec({std::sqrt(0.3), 1.0});
  const MarketDefinition m(b, ValueDistribution::uniform(2));
  const int trials = 200;
  int covered = 0;
  for (int k = 0; k < trials; ++k) {
    const auto batch = sample_items(m, 400, 1000 + k);
    const auto s = solve_fppe(batch, b);
    covered += infer(s, batch, b, 0.1).cr_beta.contains(beta_star) ? 1 : 0;
  }
  const double rate = static_cast<double>(covered) / trials;
  // Binomial sd at 200 trials is 0.021.
  CHECK(rate >= 0.84);
  CHECK(rate <= 0.96);
}
