#include "fppe/experiments.hpp"

#include <cmath>
#include <limits>

#include "fppe/abtest.hpp"
#include "fppe/errors.hpp"
#include "fppe/inference.hpp"
#include "fppe/rng.hpp"
#include "fppe/solver.hpp"
#include "fppe/stats.hpp"

namespace fppe {

ValueDistribution ValueSpec::make(int n) const {
  switch (family) {
    case ValueFamily::uniform: return ValueDistribution::uniform(n, 0.0, param);
    case ValueFamily::exponential: return ValueDistribution::exponential(n, param, bound);
    case ValueFamily::truncated_normal: return ValueDistribution::truncated_normal(n, param, bound);
    case ValueFamily::constant: return ValueDistribution::constant(Eigen::VectorXd::Constant(n, param));
    case ValueFamily::custom_matrix: break;
  }
  throw ArgumentError("scenario value processes cannot use custom_matrix");
}

void ScenarioConfig::validate() const {
  if (trials < 1) throw ArgumentError("trials must be >= 1");
  if (n_grid.empty() || t_grid.empty() || budget_fractions.empty() || pi_grid.empty() || d_grid.empty())
    throw ArgumentError("scenario grids must be nonempty");
  for (int n : n_grid)
    if (n < 1) throw ArgumentError("buyer counts must be >= 1");
  for (int t : t_grid)
    if (t < 1) throw ArgumentError("item counts must be >= 1");
  for (double f : budget_fractions)
    if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("budget fractions must lie in [0, 1]");
  for (double p : pi_grid)
    if (!(p > 0.0 && p < 1.0)) throw ArgumentError("treatment probabilities must lie in (0, 1)");
  for (double dd : d_grid)
    if (!(dd > 0.0)) throw ArgumentError("smoothing exponents must be positive");
  if (!(d > 0.0 && d < 0.5)) throw ArgumentError("d must lie in (0, 0.5)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (da_iterations < 1 || revenue_samples < 1) throw ArgumentError("ground-truth sizes must be >= 1");
}

namespace {

std::uint64_t market_seed(const ScenarioConfig& cfg, int n, double fraction) {
  const auto tag = static_cast<std::uint64_t>(n) * 1000003ULL +
                   static_cast<std::uint64_t>(std::llround(fraction * 1000.0));
  return derive_seed(cfg.seed, tag);
}

}  // namespace

Eigen::VectorXd scenario_budgets(const ScenarioConfig& cfg, int n, double fraction) {
  Eigen::VectorXd b = leftover_budget_scheme(n, fraction, derive_seed(market_seed(cfg, n, fraction), 1));
  if (cfg.normalize_budgets) b /= b.sum();
  return b;
}

GroundTruth compute_ground_truth(const MarketDefinition& mdef, std::uint64_t seed,
                                 long long da_iterations, long long revenue_samples,
                                 double tolerance) {
  GroundTruth gt;
  gt.beta = solve_limit_dual_averaging(mdef, da_iterations, derive_seed(seed, 1));
  gt.beta_check = solve_limit_dual_averaging(mdef, da_iterations, derive_seed(seed, 2));
  gt.discrepancy = (gt.beta - gt.beta_check).cwiseAbs().maxCoeff();
  if (gt.discrepancy > tolerance)
    throw ExperimentError("dual averaging runs disagree on beta* by " + std::to_string(gt.discrepancy) +
                          " (tolerance " + std::to_string(tolerance) + ")");
  gt.revenue = limit_revenue(mdef, gt.beta, revenue_samples, derive_seed(seed, 3));
  return gt;
}

namespace {

struct TrialOutcome {
  bool ok = false;
  bool covered = false;
  double width = 0.0;
  std::string error;
};

CoverageRow aggregate(const std::vector<TrialOutcome>& outcomes) {
  CoverageRow row;
  double width = 0.0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++row.failed;
      if (row.first_error.empty()) row.first_error = o.error;
      continue;
    }
    ++row.trials;
    row.covered += o.covered ? 1 : 0;
    width += o.width;
  }
  if (row.trials > 0) {
    row.coverage = static_cast<double>(row.covered) / row.trials;
    row.mean_width = width / row.trials;
  }
  return row;
}

}  // namespace

std::vector<CoverageRow> run_coverage_study(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<CoverageRow> rows;
  for (int n : cfg.n_grid) {
    for (double fraction : cfg.budget_fractions) {
      const std::uint64_t ms = market_seed(cfg, n, fraction);
      const MarketDefinition mdef(scenario_budgets(cfg, n, fraction), cfg.values.make(n));
      const GroundTruth gt = compute_ground_truth(mdef, derive_seed(ms, 2), cfg.da_iterations,
                                                  cfg.revenue_samples, cfg.stability_tolerance);
      for (int t : cfg.t_grid) {
        const std::uint64_t cell_seed = derive_seed(ms, 1000 + static_cast<std::uint64_t>(t));
        std::vector<TrialOutcome> outcomes(cfg.trials);
        detail::parallel_for(cfg.trials, cfg.jobs, [&](int k) {
          TrialOutcome& out = outcomes[k];
          try {
            const ItemBatch batch = sample_items(mdef, t, cell_seed + static_cast<std::uint64_t>(k));
            const EquilibriumSolution sol = solve_fppe(batch, mdef.budgets);
            const InferenceReport rep = infer(sol, batch, mdef.budgets, cfg.alpha, cfg.d);
            out.ok = true;
            out.covered = rep.ci_rev.contains(gt.revenue);
            out.width = rep.ci_rev.width();
          } catch (const std::exception& e) {
            out.error = e.what();
          }
        });
        CoverageRow row = aggregate(outcomes);
        row.n = n;
        row.budget_fraction = fraction;
        row.t = t;
        row.truth = gt.revenue;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<CoverageRow> run_ab_coverage_study(const ScenarioConfig& cfg) {
  cfg.validate();
  const double fraction = cfg.budget_fractions.front();
  std::vector<CoverageRow> rows;
  for (int n : cfg.n_grid) {
    const std::uint64_t ms = market_seed(cfg, n, fraction);
    const Eigen::VectorXd budgets = scenario_budgets(cfg, n, fraction);
    const MarketDefinition control(budgets, cfg.values.make(n));
    const MarketDefinition treated(budgets, cfg.treatment.make(n));
    const GroundTruth gt0 = compute_ground_truth(control, derive_seed(ms, 3), cfg.da_iterations,
                                                 cfg.revenue_samples, cfg.stability_tolerance);
    const GroundTruth gt1 = compute_ground_truth(treated, derive_seed(ms, 4), cfg.da_iterations,
                                                 cfg.revenue_samples, cfg.stability_tolerance);
    const double truth = gt1.revenue - gt0.revenue;
    for (int t : cfg.t_grid) {
      for (double pi : cfg.pi_grid) {
        const std::uint64_t cell_seed =
            derive_seed(ms, 2000000 + static_cast<std::uint64_t>(t) * 1000 +
                                static_cast<std::uint64_t>(std::llround(pi * 1000.0)));
        std::vector<TrialOutcome> outcomes(cfg.trials);
        detail::parallel_for(cfg.trials, cfg.jobs, [&](int k) {
          TrialOutcome& out = outcomes[k];
          try {
            ABDesign design(pi, t, cell_seed + static_cast<std::uint64_t>(k), budgets,
                            control.values, treated.values);
            design.alpha = cfg.alpha;
            design.d = cfg.d;
            const ABTestResult res = run_ab_experiment(design);
            const Interval ci = treatment_effect_ci(res, cfg.alpha).rev;
            out.ok = true;
            out.covered = ci.contains(truth);
            out.width = ci.width();
          } catch (const std::exception& e) {
            out.error = e.what();
          }
        });
        CoverageRow row = aggregate(outcomes);
        row.n = n;
        row.budget_fraction = fraction;
        row.t = t;
        row.pi = pi;
        row.truth = truth;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

CltHistogram run_clt_histogram(const ScenarioConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_grid.front(), t = cfg.t_grid.front();
  const double fraction = cfg.budget_fractions.front();
  const std::uint64_t ms = market_seed(cfg, n, fraction);
  const MarketDefinition mdef(scenario_budgets(cfg, n, fraction), cfg.values.make(n));
  const GroundTruth gt = compute_ground_truth(mdef, derive_seed(ms, 2), cfg.da_iterations,
                                              cfg.revenue_samples, cfg.stability_tolerance);
  const std::uint64_t cell_seed = derive_seed(ms, 5000 + static_cast<std::uint64_t>(t));

  std::vector<Eigen::VectorXd> betas(cfg.trials);
  std::vector<char> ok(cfg.trials, 0);
  detail::parallel_for(cfg.trials, cfg.jobs, [&](int k) {
    try {
      const ItemBatch batch = sample_items(mdef, t, cell_seed + static_cast<std::uint64_t>(k));
      betas[k] = solve_dual_eg(batch, mdef.budgets);
      ok[k] = 1;
    } catch (const SolverError&) {
    }
  });

  CltHistogram hist;
  hist.n = n;
  hist.t = t;
  int completed = 0;
  for (char c : ok) completed += c;
  hist.failed = cfg.trials - completed;
  hist.samples.resize(completed, n);
  hist.beta.resize(completed, n);
  const double root_t = std::sqrt(static_cast<double>(t));
  for (int k = 0, row = 0; k < cfg.trials; ++k) {
    if (!ok[k]) continue;
    hist.beta.row(row) = betas[k].transpose();
    hist.samples.row(row) = root_t * (betas[k] - gt.beta).transpose();
    ++row;
  }
  const int inflated = static_cast<int>(std::ceil(fraction * n - 1e-9));
  for (int i = 0; i < n; ++i) {
    CltBuyerSummary s;
    s.beta_star = gt.beta[i];
    s.inflated = i < inflated;
    if (completed > 0) {
      std::vector<double> col(hist.samples.col(i).data(), hist.samples.col(i).data() + completed);
      s.mean = stats::mean(col);
      s.sd = std::sqrt(stats::variance(col));
      s.skewness = stats::skewness(col);
      s.excess_kurtosis = stats::excess_kurtosis(col);
      int near = 0;
      for (int k = 0; k < completed; ++k) near += root_t * std::abs(hist.beta(k, i) - 1.0) <= 0.05 ? 1 : 0;
      s.boundary_mass = static_cast<double>(near) / completed;
    }
    hist.buyers.push_back(s);
  }
  return hist;
}

std::vector<SmoothingRow> run_smoothing_study(const ScenarioConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_grid.front();
  const double fraction = cfg.budget_fractions.front();
  const std::uint64_t ms = market_seed(cfg, n, fraction);
  const MarketDefinition mdef(scenario_budgets(cfg, n, fraction), cfg.values.make(n));
  Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(n, cfg.beta_low, cfg.beta_high);
  if (n == 1) beta[0] = cfg.beta_low;

  const int nd = static_cast<int>(cfg.d_grid.size());
  const int nt = static_cast<int>(cfg.t_grid.size());
  const int cells = nd * nt * cfg.trials;
  std::vector<SmoothingRow> rows(static_cast<std::size_t>(cells) * n);
  detail::parallel_for(cells, cfg.jobs, [&](int cell) {
    const int di = cell / (nt * cfg.trials);
    const int ti = (cell / cfg.trials) % nt;
    const int trial = cell % cfg.trials;
    const int t = cfg.t_grid[ti];
    const double d = cfg.d_grid[di];
    // Batches depend on (t, trial) only, so every d sees the same items.
    const ItemBatch batch = sample_items(
        mdef, t, derive_seed(ms, 7000 + static_cast<std::uint64_t>(t)) + static_cast<std::uint64_t>(trial));
    const double eps = std::pow(static_cast<double>(t), -d);
    const HessianDiagonal diag = numerical_hessian_diagonal(batch, mdef.budgets, beta, eps);
    for (int i = 0; i < n; ++i) {
      SmoothingRow& r = rows[static_cast<std::size_t>(cell) * n + i];
      r.d = d;
      r.t = t;
      r.trial = trial;
      r.i = i;
      r.valid = diag.valid[i];
      r.h_psi_ii = diag.barrier_part[i];
      r.h_ii = diag.price_part[i] + diag.barrier_part[i];
      r.analytic = mdef.budgets[i] / (beta[i] * beta[i]);
    }
  });
  return rows;
}

}  // namespace fppe
