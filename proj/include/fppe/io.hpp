#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fppe/abtest.hpp"
#include "fppe/experiments.hpp"
#include "fppe/inference.hpp"
#include "fppe/market.hpp"
#include "fppe/solver.hpp"

namespace fppe::io {

using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

/// A batch together with the budgets it is solved against. JSON schema:
/// {"n": int, "budgets": [..], "values": [[..] per buyer], "supply_weight": real, "seed": int}.
struct Problem {
  Eigen::VectorXd budgets;
  ItemBatch batch;
};

json vector_to_json(const Eigen::VectorXd& v);
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const json& j);
Eigen::MatrixXd matrix_from_json(const json& j);

json problem_to_json(const Problem& p);
Problem problem_from_json(const json& j);

json distribution_to_json(const ValueDistribution& d);
ValueDistribution distribution_from_json(const json& j);
json market_to_json(const MarketDefinition& m);
MarketDefinition market_from_json(const json& j);

json solution_to_json(const EquilibriumSolution& s);
EquilibriumSolution solution_from_json(const json& j);
json report_to_json(const InferenceReport& r);
json ab_result_to_json(const ABTestResult& r, double alpha);

json value_spec_to_json(const ValueSpec& v);
ValueSpec value_spec_from_json(const json& j);
json scenario_to_json(const ScenarioConfig& c);
/// Missing keys keep their ScenarioConfig defaults; unknown keys are rejected.
ScenarioConfig scenario_from_json(const json& j);

/// FNV-1a of the canonical dump.
std::uint64_t config_hash(const json& j);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

/// Value matrix as CSV, one row per buyer.
void write_values_csv(std::ostream& os, const Eigen::MatrixXd& values);
void write_coverage_csv(std::ostream& os, const std::vector<CoverageRow>& rows);
void write_smoothing_csv(std::ostream& os, const std::vector<SmoothingRow>& rows);
/// Long format: trial, i, beta, scaled_deviation.
void write_clt_csv(std::ostream& os, const CltHistogram& h);
void write_clt_summary_csv(std::ostream& os, const CltHistogram& h);

}  // namespace fppe::io
