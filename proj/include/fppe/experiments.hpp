#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "fppe/market.hpp"

namespace fppe {

/// Value process of one arm or scenario. `param` is the upper end for
/// uniform (lower end 0), the rate for exponential, the scale for truncated
/// normal and the level for constant. `bound` clips exponential and normal.
struct ValueSpec {
  ValueFamily family = ValueFamily::uniform;
  double param = 1.0;
  double bound = 3.0;

  ValueDistribution make(int n) const;
};

struct ScenarioConfig {
  std::vector<int> n_grid{10};
  std::vector<int> t_grid{80};
  ValueSpec values;
  ValueSpec treatment{ValueFamily::exponential, 2.0, 3.0};
  std::vector<double> budget_fractions{0.4};
  /// Divide the drawn budgets by their sum so total budget matches the unit
  /// total supply. Raw budgets leave every uniform-value buyer unpaced, so
  /// the CLT study turns this on; the coverage studies keep it off.
  bool normalize_budgets = false;
  std::vector<double> pi_grid{0.5};
  std::vector<double> d_grid{0.4};
  double d = 0.4;
  double alpha = 0.1;
  int trials = 100;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0: hardware concurrency
  long long da_iterations = 1000000;
  long long revenue_samples = 1000000;
  double stability_tolerance = 0.01;
  /// Hessian study evaluation point: linspace(beta_low, beta_high, n).
  double beta_low = 0.2;
  double beta_high = 1.0;

  void validate() const;
};

struct CoverageRow {
  int n = 0;
  double budget_fraction = 0.0;
  int t = 0;
  double pi = 0.0;      // A/B studies only
  double truth = 0.0;   // REV* or tau*_REV
  int trials = 0;       // completed trials entering the rate
  int failed = 0;       // trials excluded after an error
  int covered = 0;
  double coverage = 0.0;  // covered / trials
  double mean_width = 0.0;
  std::string first_error;
};

struct GroundTruth {
  Eigen::VectorXd beta;
  Eigen::VectorXd beta_check;
  double revenue = 0.0;
  double discrepancy = 0.0;
};

/// beta* by dual averaging twice with independent seeds (they must agree
/// within `tolerance`, otherwise ExperimentError) and REV* by plugging beta*
/// into a fresh sample.
GroundTruth compute_ground_truth(const MarketDefinition& mdef, std::uint64_t seed,
                                 long long da_iterations, long long revenue_samples,
                                 double tolerance);

/// Budgets used for the study cell with n buyers and leftover fraction f.
Eigen::VectorXd scenario_budgets(const ScenarioConfig& cfg, int n, double fraction);

std::vector<CoverageRow> run_coverage_study(const ScenarioConfig& cfg);
std::vector<CoverageRow> run_ab_coverage_study(const ScenarioConfig& cfg);

struct CltBuyerSummary {
  double beta_star = 0.0;
  bool inflated = false;  // budget shifted up by one
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double boundary_mass = 0.0;  // share of trials with sqrt(t) |beta - 1| <= 0.05
};

struct CltHistogram {
  int n = 0;
  int t = 0;
  /// samples(trial, i) = sqrt(t) (beta_i - beta*_i); failed trials are dropped.
  Eigen::MatrixXd samples;
  Eigen::MatrixXd beta;  // raw beta per completed trial
  std::vector<CltBuyerSummary> buyers;
  int failed = 0;
};

/// Uses n_grid[0], t_grid[0] and budget_fractions[0].
CltHistogram run_clt_histogram(const ScenarioConfig& cfg);

struct SmoothingRow {
  double d = 0.0;
  int t = 0;
  int trial = 0;
  int i = 0;
  double h_ii = 0.0;      // NaN when the stencil left the log domain
  double h_psi_ii = 0.0;  // barrier part of h_ii
  double analytic = 0.0;  // b_i / beta_i^2
  bool valid = true;
};

/// Diagonal Hessian estimates at linspace(beta_low, beta_high, n_grid[0])
/// over d_grid x t_grid x trials.
std::vector<SmoothingRow> run_smoothing_study(const ScenarioConfig& cfg);

namespace detail {

/// Runs body(k) for k in [0, count) on `jobs` threads. Results must be
/// written to per-index slots so the outcome does not depend on scheduling.
template <class Body>
void parallel_for(int count, int jobs, Body&& body) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::max(1, std::min(jobs, count));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int k = next++; k < count; k = next++) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

}  // namespace fppe
