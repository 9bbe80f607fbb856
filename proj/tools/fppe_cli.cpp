#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fppe/abtest.hpp"
#include "fppe/errors.hpp"
#include "fppe/experiments.hpp"
#include "fppe/inference.hpp"
#include "fppe/io.hpp"
#include "fppe/solver.hpp"

namespace fs = std::filesystem;
using fppe::io::json;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> jobs;
  std::string out = "results";
};

fppe::ScenarioConfig load_scenario(const CommonOptions& o, const fppe::ScenarioConfig& defaults) {
  fppe::ScenarioConfig cfg = defaults;
  if (!o.config.empty()) {
    json merged = fppe::io::scenario_to_json(defaults);
    merged.update(fppe::io::read_json_file(o.config));
    cfg = fppe::io::scenario_from_json(merged);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.jobs) cfg.jobs = *o.jobs;
  cfg.validate();
  return cfg;
}

void write_manifest(const std::string& dir, const std::string& command, const fppe::ScenarioConfig& cfg,
                    const std::vector<std::string>& outputs) {
  const json config = fppe::io::scenario_to_json(cfg);
  json manifest{{"command", command},
                {"version", fppe::io::kVersion},
                {"config", config},
                {"config_hash", fppe::io::config_hash(config)},
                {"outputs", outputs}};
  fppe::io::write_json_file((fs::path(dir) / "manifest.json").string(), manifest);
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / name);
  if (!out) throw fppe::ArgumentError("cannot write " + (fs::path(dir) / name).string());
  return out;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "scenario JSON file");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--trials", o.trials, "trials per configuration");
  cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
  cmd->add_option("--out", o.out, "results directory")->capture_default_str();
}

void print_table(const fppe::EquilibriumSolution& s, std::ostream& os) {
  os << std::setw(6) << "buyer" << std::setw(14) << "beta" << std::setw(14) << "utility" << std::setw(14)
     << "leftover" << '\n';
  for (Eigen::Index i = 0; i < s.beta.size(); ++i)
    os << std::setw(6) << i << std::setw(14) << std::setprecision(8) << s.beta[i] << std::setw(14)
       << s.total_utility[i] << std::setw(14) << s.leftover[i] << '\n';
  os << "revenue " << std::setprecision(12) << s.revenue << "  nsw " << s.nsw << "  kkt " << s.kkt_residual
     << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-price pacing equilibria: solve, infer, A/B test and coverage studies"};
  app.require_subcommand(1);

  std::string input, solution_path, output_path;
  double alpha = 0.1, d = 0.4, pi = 0.5;
  int t_items = 200;

  auto* solve = app.add_subcommand("solve", "solve the observed FPPE of a problem JSON");
  solve->add_option("--input", input, "problem JSON")->required();
  solve->add_option("--output", output_path, "write the solution JSON here");

  auto* infer_cmd = app.add_subcommand("infer", "inference report for a problem JSON");
  infer_cmd->add_option("--input", input, "problem JSON")->required();
  infer_cmd->add_option("--solution", solution_path, "solution JSON (solved when omitted)");
  infer_cmd->add_option("--alpha", alpha)->capture_default_str();
  infer_cmd->add_option("--d", d, "smoothing exponent, epsilon = t^-d")->capture_default_str();
  infer_cmd->add_option("--output", output_path, "write the report JSON here");

  CommonOptions ab_opts;
  auto* abtest = app.add_subcommand("abtest", "one budget-splitting A/B experiment");
  abtest->add_option("--pi", pi)->capture_default_str();
  abtest->add_option("--t", t_items)->capture_default_str();
  abtest->add_option("--alpha", alpha)->capture_default_str();
  abtest->add_option("--output", output_path, "write the result JSON here");
  add_common(abtest, ab_opts);

  int sample_n = 10;
  std::string family = "uniform";
  double fraction = 0.4;
  std::uint64_t sample_seed = 1;
  auto* sample = app.add_subcommand("sample", "draw a problem JSON from the experiment generators");
  sample->add_option("--n", sample_n)->capture_default_str();
  sample->add_option("--t", t_items)->capture_default_str();
  sample->add_option("--family", family)->capture_default_str();
  sample->add_option("--budget-fraction", fraction)->capture_default_str();
  sample->add_option("--seed", sample_seed)->capture_default_str();
  sample->add_option("--output", output_path, "write the problem JSON here");
  std::string values_csv;
  sample->add_option("--values-csv", values_csv, "also write the value matrix as CSV");

  CommonOptions cov_opts, abcov_opts, clt_opts, hess_opts;
  auto* coverage = app.add_subcommand("coverage", "revenue CI coverage study");
  add_common(coverage, cov_opts);
  auto* abcov = app.add_subcommand("ab-coverage", "A/B treatment-effect CI coverage study");
  add_common(abcov, abcov_opts);
  auto* clt = app.add_subcommand("clt-hist", "samples of sqrt(t)(beta - beta*) for histograms");
  add_common(clt, clt_opts);
  auto* hess = app.add_subcommand("hessian-study", "smoothing-parameter sweep of the Hessian estimator");
  add_common(hess, hess_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    auto emit = [&](const json& j) {
      if (!output_path.empty()) fppe::io::write_json_file(output_path, j);
      else std::cout << j.dump(2) << '\n';
    };

    if (*solve) {
      const auto problem = fppe::io::problem_from_json(fppe::io::read_json_file(input));
      const auto sol = fppe::solve_fppe(problem.batch, problem.budgets);
      emit(fppe::io::solution_to_json(sol));
      print_table(sol, output_path.empty() ? std::cerr : std::cout);
    } else if (*infer_cmd) {
      const auto problem = fppe::io::problem_from_json(fppe::io::read_json_file(input));
      const auto sol = solution_path.empty() ? fppe::solve_fppe(problem.batch, problem.budgets)
                                             : fppe::io::solution_from_json(fppe::io::read_json_file(solution_path));
      const auto rep = fppe::infer(sol, problem.batch, problem.budgets, alpha, d);
      emit(fppe::io::report_to_json(rep));
    } else if (*abtest) {
      fppe::ScenarioConfig defaults;
      defaults.n_grid = {30};
      defaults.budget_fractions = {0.3};
      const auto cfg = load_scenario(ab_opts, defaults);
      const int n = cfg.n_grid.front();
      fppe::ABDesign design(pi, t_items, cfg.seed, fppe::scenario_budgets(cfg, n, cfg.budget_fractions.front()),
                            cfg.values.make(n), cfg.treatment.make(n));
      design.alpha = alpha;
      design.d = cfg.d;
      const auto res = fppe::run_ab_experiment(design);
      emit(fppe::io::ab_result_to_json(res, alpha));
      const auto ci = fppe::treatment_effect_ci(res, alpha).rev;
      std::cerr << "tau_rev " << res.tau_rev << " CI [" << ci.lower << ", " << ci.upper << "] verdict "
                << fppe::to_string(fppe::decide(ci)) << '\n';
    } else if (*sample) {
      fppe::ValueSpec spec;
      spec.family = fppe::parse_value_family(family);
      fppe::ScenarioConfig cfg;
      cfg.seed = sample_seed;
      const fppe::MarketDefinition mdef(fppe::scenario_budgets(cfg, sample_n, fraction), spec.make(sample_n));
      fppe::io::Problem p{mdef.budgets, fppe::sample_items(mdef, t_items, sample_seed)};
      emit(fppe::io::problem_to_json(p));
      if (!values_csv.empty()) {
        std::ofstream out(values_csv);
        fppe::io::write_values_csv(out, p.batch.values);
      }
    } else if (*coverage) {
      fppe::ScenarioConfig defaults;
      defaults.budget_fractions = {0.4, 0.6, 0.8};
      defaults.t_grid = {40, 60, 80};
      const auto cfg = load_scenario(cov_opts, defaults);
      const auto rows = fppe::run_coverage_study(cfg);
      auto out = open_output(cov_opts.out, "coverage.csv");
      fppe::io::write_coverage_csv(out, rows);
      write_manifest(cov_opts.out, "coverage", cfg, {"coverage.csv"});
      fppe::io::write_coverage_csv(std::cout, rows);
    } else if (*abcov) {
      fppe::ScenarioConfig defaults;
      defaults.n_grid = {30, 60};
      defaults.t_grid = {100, 200};
      defaults.pi_grid = {0.3, 0.5};
      defaults.budget_fractions = {0.3};
      const auto cfg = load_scenario(abcov_opts, defaults);
      const auto rows = fppe::run_ab_coverage_study(cfg);
      auto out = open_output(abcov_opts.out, "ab_coverage.csv");
      fppe::io::write_coverage_csv(out, rows);
      write_manifest(abcov_opts.out, "ab-coverage", cfg, {"ab_coverage.csv"});
      fppe::io::write_coverage_csv(std::cout, rows);
    } else if (*clt) {
      fppe::ScenarioConfig defaults;
      defaults.n_grid = {25};
      defaults.t_grid = {1000};
      defaults.budget_fractions = {0.2};
      defaults.normalize_budgets = true;
      const auto cfg = load_scenario(clt_opts, defaults);
      const auto hist = fppe::run_clt_histogram(cfg);
      {
        auto out = open_output(clt_opts.out, "clt_samples.csv");
        fppe::io::write_clt_csv(out, hist);
      }
      auto summary = open_output(clt_opts.out, "clt_summary.csv");
      fppe::io::write_clt_summary_csv(summary, hist);
      write_manifest(clt_opts.out, "clt-hist", cfg, {"clt_samples.csv", "clt_summary.csv"});
      fppe::io::write_clt_summary_csv(std::cout, hist);
    } else if (*hess) {
      fppe::ScenarioConfig defaults;
      defaults.n_grid = {7};
      defaults.trials = 10;
      defaults.budget_fractions = {0.0};
      defaults.d_grid = {0.10, 0.17, 0.25, 0.32, 0.40, 0.47, 0.55, 0.62, 0.70};
      defaults.t_grid = {199,  223,  249,  279,  311,  348,  389,  434,  486,  543,
                         606,  678,  757,  846,  946,  1057, 1181, 1319, 1474, 1647,
                         1841, 2057, 2298, 2568, 2870, 3207, 3583, 4004, 4474, 5000};
      const auto cfg = load_scenario(hess_opts, defaults);
      const auto rows = fppe::run_smoothing_study(cfg);
      auto out = open_output(hess_opts.out, "hessian_study.csv");
      fppe::io::write_smoothing_csv(out, rows);
      write_manifest(hess_opts.out, "hessian-study", cfg, {"hessian_study.csv"});
      std::size_t invalid = 0;
      for (const auto& r : rows) invalid += r.valid ? 0 : 1;
      std::cout << rows.size() << " rows written, " << invalid << " outside the stencil domain\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
