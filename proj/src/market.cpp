#include "fppe/market.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "fppe/errors.hpp"
#include "fppe/rng.hpp"

namespace fppe {

std::string_view to_string(ValueFamily family) {
  switch (family) {
    case ValueFamily::uniform: return "uniform";
    case ValueFamily::exponential: return "exponential";
    case ValueFamily::truncated_normal: return "truncated_normal";
    case ValueFamily::constant: return "constant";
    case ValueFamily::custom_matrix: return "custom_matrix";
  }
  return "unknown";
}

ValueFamily parse_value_family(std::string_view name) {
  if (name == "uniform") return ValueFamily::uniform;
  if (name == "exponential") return ValueFamily::exponential;
  if (name == "truncated_normal" || name == "normal") return ValueFamily::truncated_normal;
  if (name == "constant") return ValueFamily::constant;
  if (name == "custom_matrix") return ValueFamily::custom_matrix;
  throw ArgumentError("unknown value family '" + std::string(name) + "'");
}

namespace {

void require_positive(const Eigen::VectorXd& v, const char* what) {
  if (v.size() == 0) throw ArgumentError(std::string(what) + ": empty parameter vector");
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError(std::string(what) + " must be positive");
}

}  // namespace

ValueDistribution ValueDistribution::uniform(Eigen::VectorXd low, Eigen::VectorXd high) {
  if (low.size() != high.size() || low.size() == 0)
    throw ArgumentError("uniform: low/high size mismatch");
  for (Eigen::Index i = 0; i < low.size(); ++i)
    if (!(low[i] >= 0.0) || !(high[i] >= low[i]) || !std::isfinite(high[i]))
      throw ArgumentError("uniform: need 0 <= low <= high < inf");
  ValueDistribution d;
  d.family_ = ValueFamily::uniform;
  d.n_ = static_cast<int>(low.size());
  d.bound_ = high.maxCoeff();
  d.a_ = std::move(low);
  d.b_ = std::move(high);
  return d;
}

ValueDistribution ValueDistribution::uniform(int n, double low, double high) {
  return uniform(Eigen::VectorXd::Constant(n, low), Eigen::VectorXd::Constant(n, high));
}

ValueDistribution ValueDistribution::exponential(Eigen::VectorXd rate, double bound) {
  require_positive(rate, "exponential rate");
  if (!(bound > 0.0)) throw ArgumentError("exponential: bound must be positive");
  ValueDistribution d;
  d.family_ = ValueFamily::exponential;
  d.n_ = static_cast<int>(rate.size());
  d.bound_ = bound;
  d.a_ = std::move(rate);
  return d;
}

ValueDistribution ValueDistribution::exponential(int n, double rate, double bound) {
  return exponential(Eigen::VectorXd::Constant(n, rate), bound);
}

ValueDistribution ValueDistribution::truncated_normal(Eigen::VectorXd scale, double bound) {
  require_positive(scale, "truncated_normal scale");
  if (!(bound > 0.0)) throw ArgumentError("truncated_normal: bound must be positive");
  ValueDistribution d;
  d.family_ = ValueFamily::truncated_normal;
  d.n_ = static_cast<int>(scale.size());
  d.bound_ = bound;
  d.a_ = std::move(scale);
  return d;
}

ValueDistribution ValueDistribution::truncated_normal(int n, double scale, double bound) {
  return truncated_normal(Eigen::VectorXd::Constant(n, scale), bound);
}

ValueDistribution ValueDistribution::constant(Eigen::VectorXd level) {
  if (level.size() == 0) throw ArgumentError("constant: empty level vector");
  for (double x : level)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ArgumentError("constant: levels must be finite and >= 0");
  ValueDistribution d;
  d.family_ = ValueFamily::constant;
  d.n_ = static_cast<int>(level.size());
  // A zero-value market still needs a positive envelope.
  d.bound_ = std::max(level.maxCoeff(), 1.0e-300);
  d.a_ = std::move(level);
  return d;
}

ValueDistribution ValueDistribution::custom_matrix(Eigen::MatrixXd atoms) {
  if (atoms.rows() == 0 || atoms.cols() == 0) throw ArgumentError("custom_matrix: empty atom matrix");
  if (!atoms.allFinite() || atoms.minCoeff() < 0.0)
    throw ArgumentError("custom_matrix: atoms must be finite and >= 0");
  ValueDistribution d;
  d.family_ = ValueFamily::custom_matrix;
  d.n_ = static_cast<int>(atoms.rows());
  d.bound_ = std::max(atoms.maxCoeff(), 1.0e-300);
  d.atoms_ = std::move(atoms);
  return d;
}

ValueDistribution ValueDistribution::scaled(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("scale factor must be positive");
  ValueDistribution d = *this;
  d.bound_ *= alpha;
  switch (family_) {
    case ValueFamily::uniform:
      d.a_ *= alpha;
      d.b_ *= alpha;
      break;
    case ValueFamily::exponential:
      d.a_ /= alpha;
      break;
    case ValueFamily::truncated_normal:
    case ValueFamily::constant:
      d.a_ *= alpha;
      break;
    case ValueFamily::custom_matrix:
      d.atoms_ *= alpha;
      break;
  }
  return d;
}

void ValueDistribution::evaluate(const double* latent, double* out) const {
  switch (family_) {
    case ValueFamily::uniform:
      for (int i = 0; i < n_; ++i) out[i] = a_[i] + (b_[i] - a_[i]) * latent[i];
      break;
    case ValueFamily::exponential:
      for (int i = 0; i < n_; ++i) out[i] = std::min(bound_, -std::log1p(-latent[i]) / a_[i]);
      break;
    case ValueFamily::truncated_normal: {
      static const boost::math::normal standard;
      for (int i = 0; i < n_; ++i) {
        // |Z| has quantile function Phi^{-1}((1 + u) / 2).
        const double z = boost::math::quantile(standard, 0.5 + 0.5 * latent[i]);
        out[i] = std::min(bound_, a_[i] * z);
      }
      break;
    }
    case ValueFamily::constant:
      for (int i = 0; i < n_; ++i) out[i] = a_[i];
      break;
    case ValueFamily::custom_matrix: {
      const auto k = atoms_.cols();
      auto col = static_cast<Eigen::Index>(latent[0] * static_cast<double>(k));
      col = std::clamp<Eigen::Index>(col, 0, k - 1);
      for (int i = 0; i < n_; ++i) out[i] = atoms_(i, col);
      break;
    }
  }
}

MarketDefinition::MarketDefinition(Eigen::VectorXd b, ValueDistribution v)
    : budgets(std::move(b)), values(std::move(v)) {
  if (budgets.size() == 0) throw ArgumentError("market needs at least one buyer");
  if (budgets.size() != values.buyers())
    throw ArgumentError("budget vector and value process disagree on buyer count");
  for (double x : budgets)
    if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError("budgets must be strictly positive");
}

Eigen::MatrixXd draw_latent_items(int n, int t, std::uint64_t seed) {
  if (n < 1 || t < 1) throw ArgumentError("need n >= 1 and t >= 1");
  Rng rng(seed);
  Eigen::MatrixXd latent(n, t);
  for (int tau = 0; tau < t; ++tau)
    for (int i = 0; i < n; ++i) latent(i, tau) = rng.uniform();
  return latent;
}

Eigen::MatrixXd evaluate_items(const ValueDistribution& dist, const Eigen::MatrixXd& latent) {
  if (latent.rows() != dist.buyers()) throw ArgumentError("latent draws have wrong buyer count");
  Eigen::MatrixXd values(latent.rows(), latent.cols());
  for (Eigen::Index tau = 0; tau < latent.cols(); ++tau)
    dist.evaluate(latent.col(tau).data(), values.col(tau).data());
  const double bound = dist.value_bound();
  for (Eigen::Index tau = 0; tau < values.cols(); ++tau)
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const double v = values(i, tau);
      if (!std::isfinite(v)) throw GenerationError("generated a non-finite value");
      if (v < 0.0 || v > bound) throw GenerationError("generated value outside [0, value_bound]");
    }
  return values;
}

ItemBatch sample_items(const MarketDefinition& mdef, int t, std::uint64_t seed) {
  if (t < 1) throw ArgumentError("sample_items: t must be >= 1");
  ItemBatch batch;
  batch.values = evaluate_items(mdef.values, draw_latent_items(mdef.n(), t, seed));
  batch.supply_weight = 1.0 / t;
  batch.seed = seed;
  return batch;
}

std::pair<MarketDefinition, ItemBatch> scale_budgets_and_values(const MarketDefinition& mdef,
                                                                const ItemBatch& batch,
                                                                double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("scale factor must be positive");
  MarketDefinition scaled_def(alpha * mdef.budgets, mdef.values.scaled(alpha));
  ItemBatch scaled = batch;
  scaled.values *= alpha;
  return {std::move(scaled_def), std::move(scaled)};
}

ItemBatch scale_values_and_supply(const ItemBatch& batch, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("scale factor must be positive");
  ItemBatch scaled = batch;
  scaled.values *= alpha;
  scaled.supply_weight /= alpha;
  return scaled;
}

Eigen::VectorXd leftover_budget_scheme(int n, double fraction, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("budget scheme needs n >= 1");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("budget fraction must lie in [0,1]");
  Rng rng(seed);
  const int inflated = static_cast<int>(std::ceil(fraction * n - 1e-9));
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = rng.uniform() + (i < inflated ? 1.0 : 0.0);
  return b;
}

}  // namespace fppe
