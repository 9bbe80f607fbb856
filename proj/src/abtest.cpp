#include "fppe/abtest.hpp"

#include <cmath>
#include <string>

#include "fppe/errors.hpp"
#include "fppe/rng.hpp"
#include "fppe/stats.hpp"

namespace fppe {

ABDesign::ABDesign(double pi_, int t_, std::uint64_t seed_, Eigen::VectorXd budgets_,
                   ValueDistribution control_, ValueDistribution treatment_)
    : pi(pi_),
      t(t_),
      seed(seed_),
      budgets(std::move(budgets_)),
      control(std::move(control_)),
      treatment(std::move(treatment_)) {
  if (!(pi > 0.0 && pi < 1.0)) throw ArgumentError("treatment probability must lie in (0, 1)");
  if (t < 2) throw ArgumentError("an A/B experiment needs t >= 2");
  if (control.buyers() != treatment.buyers() || control.buyers() != budgets.size())
    throw ArgumentError("both value processes must cover the same buyers as the budgets");
  for (double b : budgets)
    if (!(b > 0.0)) throw ArgumentError("budgets must be positive");
}

namespace {

ArmResult solve_arm(const ABDesign& design, const Eigen::MatrixXd& values, double share) {
  ArmResult arm;
  arm.items = static_cast<int>(values.cols());
  arm.observed_batch.values = values;
  arm.observed_batch.supply_weight = share / arm.items;
  arm.observed_batch.seed = design.seed;
  arm.observed_budgets = share * design.budgets;
  arm.observed = solve_fppe(arm.observed_batch, arm.observed_budgets, design.solver);

  arm.analyzed_batch = arm.observed_batch;
  arm.analyzed_batch.supply_weight = 1.0 / arm.items;
  arm.analyzed = equilibrium_summary(arm.observed.beta, arm.observed.prices, arm.observed.allocation,
                                     arm.analyzed_batch, design.budgets, design.solver);
  arm.report = infer(arm.analyzed, arm.analyzed_batch, design.budgets, design.alpha, design.d);
  return arm;
}

}  // namespace

ABTestResult run_ab_experiment(const ABDesign& design) {
  const int n = static_cast<int>(design.budgets.size());
  const Eigen::MatrixXd latent = draw_latent_items(n, design.t, derive_seed(design.seed, 1));
  Rng coin(derive_seed(design.seed, 2));

  ABTestResult res;
  res.pi = design.pi;
  res.t = design.t;
  res.assignment.resize(design.t);
  for (int tau = 0; tau < design.t; ++tau) {
    res.assignment[tau] = coin.bernoulli(design.pi) ? 1 : 0;
    (res.assignment[tau] ? res.t1 : res.t0) += 1;
  }
  if (res.t1 == 0 || res.t0 == 0)
    throw ExperimentError("A/B experiment produced an empty arm (t0 = " + std::to_string(res.t0) +
                          ", t1 = " + std::to_string(res.t1) + "); rerun with larger t");

  Eigen::MatrixXd lat0(n, res.t0), lat1(n, res.t1);
  for (int tau = 0, k0 = 0, k1 = 0; tau < design.t; ++tau) {
    if (res.assignment[tau]) lat1.col(k1++) = latent.col(tau);
    else lat0.col(k0++) = latent.col(tau);
  }
  res.arm1 = solve_arm(design, evaluate_items(design.treatment, lat1), design.pi);
  res.arm0 = solve_arm(design, evaluate_items(design.control, lat0), 1.0 - design.pi);

  const EquilibriumSolution& s1 = res.arm1.analyzed;
  const EquilibriumSolution& s0 = res.arm0.analyzed;
  res.tau_rev = s1.revenue - s0.revenue;
  res.tau_beta = s1.beta - s0.beta;
  res.tau_u = s1.total_utility - s0.total_utility;
  res.tau_nsw = s1.nsw - s0.nsw;
  return res;
}

Interval treatment_effect_interval(double estimate, double var1, double var0, double pi, int t,
                                   double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (!(pi > 0.0 && pi < 1.0)) throw ArgumentError("pi must lie in (0, 1)");
  if (t < 1) throw ArgumentError("t must be positive");
  if (!(var1 >= 0.0) || !(var0 >= 0.0)) throw ConsistencyError("negative variance estimate");
  const double half =
      stats::normal_quantile(1.0 - alpha / 2.0) * std::sqrt(var1 / pi + var0 / (1.0 - pi)) / std::sqrt(t);
  return {estimate - half, estimate + half};
}

TreatmentEffectIntervals treatment_effect_ci(const ABTestResult& r, double alpha) {
  const InferenceReport& r1 = r.arm1.report;
  const InferenceReport& r0 = r.arm0.report;
  TreatmentEffectIntervals out;
  out.rev = treatment_effect_interval(r.tau_rev, r1.var_rev, r0.var_rev, r.pi, r.t, alpha);
  out.nsw = treatment_effect_interval(r.tau_nsw, r1.var_nsw, r0.var_nsw, r.pi, r.t, alpha);
  for (Eigen::Index i = 0; i < r.tau_beta.size(); ++i) {
    out.beta.push_back(treatment_effect_interval(r.tau_beta[i], r1.sigma_beta(i, i),
                                                 r0.sigma_beta(i, i), r.pi, r.t, alpha));
    out.u.push_back(treatment_effect_interval(r.tau_u[i], r1.sigma_u(i, i), r0.sigma_u(i, i), r.pi,
                                              r.t, alpha));
  }
  return out;
}

Decision decide(const Interval& interval) {
  if (interval.lower > 0.0) return Decision::increase;
  if (interval.upper < 0.0) return Decision::decrease;
  return Decision::undecided;
}

const char* to_string(Decision d) {
  switch (d) {
    case Decision::increase: return "increase";
    case Decision::decrease: return "decrease";
    case Decision::undecided: return "undecided";
  }
  return "undecided";
}

}  // namespace fppe
