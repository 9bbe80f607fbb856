#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "fppe/inference.hpp"
#include "fppe/market.hpp"
#include "fppe/solver.hpp"

namespace fppe {

struct ABDesign {
  double pi = 0.5;
  int t = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd budgets;
  ValueDistribution control;    // v(0)
  ValueDistribution treatment;  // v(1)
  double alpha = 0.1;
  double d = 0.4;
  SolverConfig solver;

  ABDesign(double pi, int t, std::uint64_t seed, Eigen::VectorXd budgets,
           ValueDistribution control, ValueDistribution treatment);
};

/// One arm of a budget-split experiment.
struct ArmResult {
  int items = 0;
  /// Observed market: budgets share * b, supply weight share / items.
  ItemBatch observed_batch;
  Eigen::VectorXd observed_budgets;
  EquilibriumSolution observed;
  /// Same equilibrium rescaled to budgets b and supply weight 1 / items.
  ItemBatch analyzed_batch;
  EquilibriumSolution analyzed;
  InferenceReport report;
};

struct ABTestResult {
  int t0 = 0, t1 = 0;
  std::vector<int> assignment;  // per item, 0 or 1
  ArmResult arm0, arm1;
  double pi = 0.5;
  int t = 0;

  double tau_rev = 0.0;
  Eigen::VectorXd tau_beta;
  Eigen::VectorXd tau_u;
  double tau_nsw = 0.0;
};

struct TreatmentEffectIntervals {
  Interval rev;
  Interval nsw;
  std::vector<Interval> beta;
  std::vector<Interval> u;
};

/// Draws t items with shared latent draws for both value processes,
/// randomizes each to treatment with probability pi, solves both arm
/// markets and runs inference on each (rescaled) arm.
/// Throws ExperimentError when an arm receives no items.
ABTestResult run_ab_experiment(const ABDesign& design);

/// tau-hat +- z_{1-alpha/2} sqrt(var(1) / pi + var(0) / (1 - pi)) / sqrt(t).
Interval treatment_effect_interval(double estimate, double var1, double var0, double pi, int t,
                                   double alpha);

TreatmentEffectIntervals treatment_effect_ci(const ABTestResult& result, double alpha);

enum class Decision { increase, decrease, undecided };

Decision decide(const Interval& interval);
const char* to_string(Decision d);

}  // namespace fppe
