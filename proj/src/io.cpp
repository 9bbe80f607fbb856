#include "fppe/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "fppe/errors.hpp"

namespace fppe::io {

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ArgumentError("expected a JSON array of numbers");
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw ArgumentError("expected a JSON array of rows");
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  const std::size_t cols = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ArgumentError("ragged matrix in JSON input");
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

json problem_to_json(const Problem& p) {
  return json{{"n", p.batch.n()},
              {"budgets", vector_to_json(p.budgets)},
              {"values", matrix_to_json(p.batch.values)},
              {"supply_weight", p.batch.supply_weight},
              {"seed", p.batch.seed}};
}

Problem problem_from_json(const json& j) {
  for (const char* key : {"budgets", "values"})
    if (!j.contains(key)) throw ArgumentError(std::string("problem JSON lacks \"") + key + "\"");
  Problem p;
  p.budgets = vector_from_json(j.at("budgets"));
  p.batch.values = matrix_from_json(j.at("values"));
  const int n = j.value("n", static_cast<int>(p.budgets.size()));
  if (n != p.budgets.size() || n != p.batch.n())
    throw ArgumentError("problem JSON: n, budgets and values disagree");
  p.batch.supply_weight = j.contains("supply_weight") ? j.at("supply_weight").get<double>()
                                                      : 1.0 / std::max(1, p.batch.t());
  p.batch.seed = j.value("seed", std::uint64_t{0});
  return p;
}

json distribution_to_json(const ValueDistribution& d) {
  json j{{"family", std::string(to_string(d.family()))}, {"n", d.buyers()}};
  switch (d.family()) {
    case ValueFamily::uniform:
      j["low"] = vector_to_json(d.param_a());
      j["high"] = vector_to_json(d.param_b());
      break;
    case ValueFamily::exponential:
      j["rate"] = vector_to_json(d.param_a());
      j["bound"] = d.value_bound();
      break;
    case ValueFamily::truncated_normal:
      j["scale"] = vector_to_json(d.param_a());
      j["bound"] = d.value_bound();
      break;
    case ValueFamily::constant:
      j["level"] = vector_to_json(d.param_a());
      break;
    case ValueFamily::custom_matrix:
      j["atoms"] = matrix_to_json(d.atoms());
      break;
  }
  return j;
}

namespace {

Eigen::VectorXd per_buyer(const json& j, const char* key, int n, double fallback) {
  if (!j.contains(key)) return Eigen::VectorXd::Constant(n, fallback);
  if (j.at(key).is_number()) return Eigen::VectorXd::Constant(n, j.at(key).get<double>());
  Eigen::VectorXd v = vector_from_json(j.at(key));
  if (v.size() != n) throw ArgumentError(std::string("distribution parameter \"") + key + "\" has wrong length");
  return v;
}

}  // namespace

ValueDistribution distribution_from_json(const json& j) {
  const ValueFamily family = parse_value_family(j.at("family").get<std::string>());
  if (family == ValueFamily::custom_matrix) return ValueDistribution::custom_matrix(matrix_from_json(j.at("atoms")));
  const int n = j.at("n").get<int>();
  const double bound = j.value("bound", 3.0);
  switch (family) {
    case ValueFamily::uniform:
      return ValueDistribution::uniform(per_buyer(j, "low", n, 0.0), per_buyer(j, "high", n, 1.0));
    case ValueFamily::exponential: return ValueDistribution::exponential(per_buyer(j, "rate", n, 1.0), bound);
    case ValueFamily::truncated_normal:
      return ValueDistribution::truncated_normal(per_buyer(j, "scale", n, 1.0), bound);
    case ValueFamily::constant: return ValueDistribution::constant(per_buyer(j, "level", n, 1.0));
    case ValueFamily::custom_matrix: break;
  }
  throw ArgumentError("unsupported value family");
}

json market_to_json(const MarketDefinition& m) {
  return json{{"n", m.n()},
              {"budgets", vector_to_json(m.budgets)},
              {"values", distribution_to_json(m.values)},
              {"value_bound", m.value_bound()}};
}

MarketDefinition market_from_json(const json& j) {
  Eigen::VectorXd budgets = vector_from_json(j.at("budgets"));
  json dist = j.at("values");
  if (!dist.contains("n")) dist["n"] = budgets.size();
  return MarketDefinition(std::move(budgets), distribution_from_json(dist));
}

json solution_to_json(const EquilibriumSolution& s) {
  return json{{"beta", vector_to_json(s.beta)},
              {"prices", vector_to_json(s.prices)},
              {"allocation", matrix_to_json(s.allocation)},
              {"leftover", vector_to_json(s.leftover)},
              {"item_utility", vector_to_json(s.item_utility)},
              {"total_utility", vector_to_json(s.total_utility)},
              {"revenue", s.revenue},
              {"nsw", s.nsw},
              {"kkt_residual", s.kkt_residual}};
}

EquilibriumSolution solution_from_json(const json& j) {
  EquilibriumSolution s;
  s.beta = vector_from_json(j.at("beta"));
  s.prices = vector_from_json(j.at("prices"));
  s.allocation = matrix_from_json(j.at("allocation"));
  s.leftover = vector_from_json(j.at("leftover"));
  s.item_utility = vector_from_json(j.at("item_utility"));
  s.total_utility = vector_from_json(j.at("total_utility"));
  s.revenue = j.at("revenue").get<double>();
  s.nsw = j.at("nsw").get<double>();
  s.kkt_residual = j.value("kkt_residual", 0.0);
  return s;
}

json report_to_json(const InferenceReport& r) {
  std::vector<int> active(r.active_indicator.data(), r.active_indicator.data() + r.active_indicator.size());
  return json{{"t", r.t},
              {"d", r.d},
              {"epsilon", r.epsilon},
              {"alpha", r.alpha},
              {"active_indicator", active},
              {"hessian", matrix_to_json(r.hessian)},
              {"projected_pinv", matrix_to_json(r.projected_pinv)},
              {"sigma_beta", matrix_to_json(r.sigma_beta)},
              {"sigma_u", matrix_to_json(r.sigma_u)},
              {"sigma_delta", matrix_to_json(r.sigma_delta)},
              {"var_rev", r.var_rev},
              {"var_nsw", r.var_nsw},
              {"ci_rev", {r.ci_rev.lower, r.ci_rev.upper}},
              {"cr_beta",
               {{"center", vector_to_json(r.cr_beta.center)},
                {"shape", matrix_to_json(r.cr_beta.shape)},
                {"radius", r.cr_beta.radius}}}};
}

namespace {

json interval_json(const Interval& iv) {
  return json{{"lower", iv.lower}, {"upper", iv.upper}, {"decision", to_string(decide(iv))}};
}

json arm_json(const ArmResult& arm) {
  return json{{"items", arm.items},
              {"observed_budgets", vector_to_json(arm.observed_budgets)},
              {"observed_supply_weight", arm.observed_batch.supply_weight},
              {"observed_revenue", arm.observed.revenue},
              {"solution", solution_to_json(arm.analyzed)},
              {"var_rev", arm.report.var_rev},
              {"var_nsw", arm.report.var_nsw},
              {"epsilon", arm.report.epsilon}};
}

}  // namespace

json ab_result_to_json(const ABTestResult& r, double alpha) {
  const TreatmentEffectIntervals ci = treatment_effect_ci(r, alpha);
  json beta_ci = json::array(), u_ci = json::array();
  for (const auto& iv : ci.beta) beta_ci.push_back(interval_json(iv));
  for (const auto& iv : ci.u) u_ci.push_back(interval_json(iv));
  return json{{"t", r.t},
              {"pi", r.pi},
              {"t0", r.t0},
              {"t1", r.t1},
              {"alpha", alpha},
              {"tau_rev", r.tau_rev},
              {"tau_nsw", r.tau_nsw},
              {"tau_beta", vector_to_json(r.tau_beta)},
              {"tau_u", vector_to_json(r.tau_u)},
              {"ci_rev", interval_json(ci.rev)},
              {"ci_nsw", interval_json(ci.nsw)},
              {"ci_beta", beta_ci},
              {"ci_u", u_ci},
              {"control", arm_json(r.arm0)},
              {"treatment", arm_json(r.arm1)}};
}

json value_spec_to_json(const ValueSpec& v) {
  return json{{"family", std::string(to_string(v.family))}, {"param", v.param}, {"bound", v.bound}};
}

ValueSpec value_spec_from_json(const json& j) {
  ValueSpec v;
  if (j.is_string()) {
    v.family = parse_value_family(j.get<std::string>());
    return v;
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "family" && it.key() != "param" && it.key() != "bound")
      throw ArgumentError("unknown value spec key \"" + it.key() + "\"");
  v.family = parse_value_family(j.at("family").get<std::string>());
  v.param = j.value("param", v.param);
  v.bound = j.value("bound", v.bound);
  return v;
}

json scenario_to_json(const ScenarioConfig& c) {
  return json{{"n", c.n_grid},
              {"t", c.t_grid},
              {"values", value_spec_to_json(c.values)},
              {"treatment", value_spec_to_json(c.treatment)},
              {"budget_fractions", c.budget_fractions},
              {"normalize_budgets", c.normalize_budgets},
              {"pi", c.pi_grid},
              {"d_grid", c.d_grid},
              {"d", c.d},
              {"alpha", c.alpha},
              {"trials", c.trials},
              {"seed", c.seed},
              {"da_iterations", c.da_iterations},
              {"revenue_samples", c.revenue_samples},
              {"stability_tolerance", c.stability_tolerance},
              {"beta_low", c.beta_low},
              {"beta_high", c.beta_high},
              {"budget_uniform_support", {0.0, 1.0}}};
}

namespace {

template <class T>
std::vector<T> scalar_or_list(const json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j) {
  static const std::set<std::string> known{
      "n", "t", "values", "treatment", "budget_fractions", "normalize_budgets", "pi", "d_grid", "d", "alpha", "trials",
      "seed", "jobs", "da_iterations", "revenue_samples", "stability_tolerance", "beta_low",
      "beta_high", "budget_uniform_support"};
  if (!j.is_object()) throw ArgumentError("scenario config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ArgumentError("unknown scenario key \"" + it.key() + "\"");
  ScenarioConfig c;
  if (j.contains("n")) c.n_grid = scalar_or_list<int>(j.at("n"));
  if (j.contains("t")) c.t_grid = scalar_or_list<int>(j.at("t"));
  if (j.contains("values")) c.values = value_spec_from_json(j.at("values"));
  if (j.contains("treatment")) c.treatment = value_spec_from_json(j.at("treatment"));
  if (j.contains("budget_fractions")) c.budget_fractions = scalar_or_list<double>(j.at("budget_fractions"));
  c.normalize_budgets = j.value("normalize_budgets", c.normalize_budgets);
  if (j.contains("pi")) c.pi_grid = scalar_or_list<double>(j.at("pi"));
  if (j.contains("d_grid")) c.d_grid = scalar_or_list<double>(j.at("d_grid"));
  c.d = j.value("d", c.d);
  c.alpha = j.value("alpha", c.alpha);
  c.trials = j.value("trials", c.trials);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  c.da_iterations = j.value("da_iterations", c.da_iterations);
  c.revenue_samples = j.value("revenue_samples", c.revenue_samples);
  c.stability_tolerance = j.value("stability_tolerance", c.stability_tolerance);
  c.beta_low = j.value("beta_low", c.beta_low);
  c.beta_high = j.value("beta_high", c.beta_high);
  c.validate();
  return c;
}

std::uint64_t config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ArgumentError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path);
  out << j.dump(2) << '\n';
}

namespace {

void precise(std::ostream& os) { os << std::setprecision(17); }

std::string csv_number(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

}  // namespace

void write_values_csv(std::ostream& os, const Eigen::MatrixXd& values) {
  precise(os);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) os << (j ? "," : "") << values(i, j);
    os << '\n';
  }
}

void write_coverage_csv(std::ostream& os, const std::vector<CoverageRow>& rows) {
  precise(os);
  os << "n,budget_fraction,t,pi,truth,trials,failed,covered,coverage,mean_width\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.budget_fraction << ',' << r.t << ',' << r.pi << ',' << r.truth << ','
       << r.trials << ',' << r.failed << ',' << r.covered << ',' << r.coverage << ',' << r.mean_width
       << '\n';
}

void write_smoothing_csv(std::ostream& os, const std::vector<SmoothingRow>& rows) {
  os << "d,t,trial,i,h_ii,h_psi_ii,analytic\n";
  for (const auto& r : rows)
    os << csv_number(r.d) << ',' << r.t << ',' << r.trial << ',' << r.i << ',' << csv_number(r.h_ii) << ','
       << csv_number(r.h_psi_ii) << ',' << csv_number(r.analytic) << '\n';
}

void write_clt_csv(std::ostream& os, const CltHistogram& h) {
  precise(os);
  os << "trial,i,beta,scaled_deviation\n";
  for (Eigen::Index k = 0; k < h.samples.rows(); ++k)
    for (Eigen::Index i = 0; i < h.samples.cols(); ++i)
      os << k << ',' << i << ',' << h.beta(k, i) << ',' << h.samples(k, i) << '\n';
}

void write_clt_summary_csv(std::ostream& os, const CltHistogram& h) {
  precise(os);
  os << "i,beta_star,inflated,mean,sd,skewness,excess_kurtosis,boundary_mass\n";
  for (std::size_t i = 0; i < h.buyers.size(); ++i) {
    const auto& b = h.buyers[i];
    os << i << ',' << b.beta_star << ',' << (b.inflated ? 1 : 0) << ',' << b.mean << ',' << b.sd << ','
       << b.skewness << ',' << b.excess_kurtosis << ',' << b.boundary_mass << '\n';
  }
}

}  // namespace fppe::io
