#include "rfcov/dgm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rfcov/error.hpp"
#include "rfcov/rng.hpp"

namespace rfcov::dgm {
namespace {

constexpr double kRho = 0.35;
constexpr std::size_t kCoreColumns = 12;
constexpr std::size_t kDefinedColumns = 27;

ColumnSpec continuous(std::string dist, bool latent = false) {
  return {ColumnKind::Continuous, 0, std::move(dist), latent};
}
ColumnSpec binary(std::string dist) { return {ColumnKind::Binary, 2, std::move(dist), false}; }
ColumnSpec categorical(int levels, std::string dist) {
  return {ColumnKind::Categorical, levels, std::move(dist), false};
}

std::vector<ColumnSpec> core_columns() {
  return {
      continuous("normal(0,1.44)"),   continuous("1.5*t(5)"),
      continuous("normal(0,1)"),      continuous("normal(0,0.0625)"),
      continuous("gamma(2,0.5)"),     binary("bernoulli(0.4)"),
      binary("bernoulli(0.5)"),       categorical(3, "categorical(0.6,0.3,0.1)"),
      continuous("normal(0,9)"),      binary("bernoulli(0.5)"),
      continuous("lognormal(0,0.6)"), continuous("beta(2,5)"),
  };
}

std::vector<ColumnSpec> extended_columns() {
  return {
      continuous("latent:normal", true),
      continuous("latent:t(7)", true),
      continuous("latent:normal:asinh", true),
      continuous("gamma(2.2,0.7)"),
      continuous("lognormal(0,0.5)"),
      continuous("uniform(0,1)"),
      binary("bernoulli(0.35)"),
      binary("bernoulli(0.45)"),
      binary("bernoulli(0.25)"),
      binary("bernoulli(0.55)"),
      binary("bernoulli(0.40)"),
      categorical(3, "categorical(0.50,0.35,0.15)"),
      categorical(4, "categorical(0.55,0.25,0.15,0.05)"),
      categorical(3, "categorical(0.65,0.25,0.10)"),
      binary("bernoulli(0.06)"),
  };
}

double draw_categorical(Rng& rng, std::initializer_list<double> probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  int level = 0;
  for (double p : probs) {
    acc += p;
    if (u < acc) return level;
    ++level;
  }
  return level - 1;
}

double draw_beta(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

// Raw (pre-standardization) draw for an independent column, 0-based index.
double draw_independent(std::size_t j, Rng& rng) {
  switch (j) {
    case 0: return std::normal_distribution<double>(0.0, 1.2)(rng);
    case 1: return 1.5 * std::student_t_distribution<double>(5.0)(rng);
    case 2: return std::normal_distribution<double>(0.0, 1.0)(rng);
    case 3: return std::normal_distribution<double>(0.0, 0.25)(rng);
    case 4: return std::gamma_distribution<double>(2.0, 0.5)(rng);
    case 5: return rng.bernoulli(0.4) ? 1.0 : 0.0;
    case 6: return rng.bernoulli(0.5) ? 1.0 : 0.0;
    case 7: return draw_categorical(rng, {0.6, 0.3, 0.1});
    case 8: return std::normal_distribution<double>(0.0, 3.0)(rng);
    case 9: return rng.bernoulli(0.5) ? 1.0 : 0.0;
    case 10: return std::lognormal_distribution<double>(0.0, 0.6)(rng);
    case 11: return draw_beta(rng, 2.0, 5.0);
    case 15: return std::gamma_distribution<double>(2.2, 0.7)(rng);
    case 16: return std::lognormal_distribution<double>(0.0, 0.5)(rng);
    case 17: return rng.uniform();
    case 18: return rng.bernoulli(0.35) ? 1.0 : 0.0;
    case 19: return rng.bernoulli(0.45) ? 1.0 : 0.0;
    case 20: return rng.bernoulli(0.25) ? 1.0 : 0.0;
    case 21: return rng.bernoulli(0.55) ? 1.0 : 0.0;
    case 22: return rng.bernoulli(0.40) ? 1.0 : 0.0;
    case 23: return draw_categorical(rng, {0.50, 0.35, 0.15});
    case 24: return draw_categorical(rng, {0.55, 0.25, 0.15, 0.05});
    case 25: return draw_categorical(rng, {0.65, 0.25, 0.10});
    case 26: return rng.bernoulli(0.06) ? 1.0 : 0.0;
    default: break;
  }
  throw std::logic_error("column is not independently generated");
}

bool ind(bool cond) noexcept { return cond; }
double x(std::span<const double> row, std::size_t k) noexcept { return row[k - 1]; }

void require_row(std::span<const double> row, const OutcomeModelSpec& spec) {
  const std::size_t need = spec.extended ? kDefinedColumns : kCoreColumns;
  if (row.size() < need) {
    throw DataError("design row has " + std::to_string(row.size()) + " columns, outcome model needs " +
                    std::to_string(need));
  }
}

}  // namespace

PredictorSchema PredictorSchema::standard(std::size_t p) {
  if (p != 10 && p < 30) {
    throw ConfigError("predictor count p = " + std::to_string(p) +
                      " does not match the simulation schema (use 10 or >= 30)");
  }
  PredictorSchema schema;
  schema.p_observed = p;
  schema.columns = core_columns();
  if (p >= 30) {
    auto ext = extended_columns();
    schema.columns.insert(schema.columns.end(), ext.begin(), ext.end());
    for (std::size_t k = 1; schema.columns.size() < p; ++k) {
      schema.columns.push_back(
          continuous(k % 4 == 0 ? "latent:normal:squared" : "latent:normal", true));
    }
  }
  return schema;
}

PredictorSchema PredictorSchema::core_subset(std::size_t p) {
  if (p == 0 || p > kCoreColumns) {
    throw ConfigError("core subset schema needs 1 <= p <= 12, got " + std::to_string(p));
  }
  PredictorSchema schema;
  schema.p_observed = p;
  schema.columns = core_columns();
  return schema;
}

std::vector<bool> Design::continuous_mask() const {
  std::vector<bool> mask(schema.columns.size());
  for (std::size_t j = 0; j < mask.size(); ++j)
    mask[j] = schema.columns[j].kind == ColumnKind::Continuous;
  return mask;
}

void standardize(std::span<double> column) {
  const std::size_t n = column.size();
  if (n == 0) return;
  const double mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double& v : column) {
    v -= mean;
    ss += v * v;
  }
  // Second centering pass removes the residual rounding in the mean.
  const double drift = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
  for (double& v : column) v -= drift;
  if (n < 2 || ss <= 0.0) return;
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  for (double& v : column) v /= sd;
}

Design gen_predictors(std::size_t n, std::size_t p, std::uint64_t seed) {
  return gen_predictors(n, PredictorSchema::standard(p), seed);
}

Design gen_predictors(std::size_t n, const PredictorSchema& schema, std::uint64_t seed) {
  if (n < 2) throw ConfigError("gen_predictors needs n >= 2");
  Design design{schema, Matrix(n, schema.columns.size())};

  std::vector<double> latent(n);
  {
    Rng rng(derive_key(seed, "latent"));
    std::normal_distribution<double> z(0.0, 1.0);
    for (double& v : latent) v = z(rng);
  }
  const double w_latent = std::sqrt(kRho);
  const double w_noise = std::sqrt(1.0 - kRho);
  // Unit-variance t(7) keeps the mixing weights meaningful as correlations.
  const double t7_scale = std::sqrt(5.0 / 7.0);

  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    Rng rng(derive_key(seed, "column", j));
    auto col = design.full.col(j);
    if (schema.columns[j].latent_mixing) {
      std::normal_distribution<double> normal(0.0, 1.0);
      std::student_t_distribution<double> t7(7.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double eps = (j == 13) ? t7_scale * t7(rng) : normal(rng);
        double v = w_latent * latent[i] + w_noise * eps;
        if (j == 14) v = std::asinh(v);
        if (j >= kDefinedColumns && (j - kDefinedColumns + 1) % 4 == 0) v = v * v;
        col[i] = v;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) col[i] = draw_independent(j, rng);
    }
    if (schema.columns[j].kind == ColumnKind::Continuous) standardize(col);
  }
  return design;
}

double mu_continuous(std::span<const double> row, const OutcomeModelSpec& spec) {
  require_row(row, spec);
  const double x1 = x(row, 1), x2 = x(row, 2), x3 = x(row, 3), x8 = x(row, 8);
  const double s11 = std::sin(x(row, 11));
  const bool x12_high = x(row, 12) > 1.0;
  double mu = 0.90 * std::sin(1.1 * x1) + 0.35 * x2 + 0.55 * (x3 * x3 - spec.x3_sq_mean) +
              0.18 * x(row, 4) + 0.30 * ind(x(row, 5) > 0.4) + 0.22 * x(row, 6) +
              0.18 * ind(x8 == 1.0) + 0.28 * ind(x8 == 2.0) + 0.45 * s11 + 0.25 * x12_high +
              0.18 * (x1 * x2) + 0.12 * (s11 * x12_high);
  if (spec.extended) {
    const double x13 = x(row, 13), x19 = x(row, 19), x20 = x(row, 20);
    mu += 0.18 * x13 + 0.12 * std::sin(x(row, 15)) + 0.10 * ind(x(row, 16) > 0.0) + 0.10 * x19 +
          0.08 * x20 + 0.10 * ind(x(row, 24) == 2.0) + 0.10 * ind(x(row, 25) == 1.0) +
          0.10 * (x13 * x19) + 0.08 * (x20 * x12_high);
  }
  return mu;
}

double sigma_continuous(std::span<const double> row, const OutcomeModelSpec& spec) {
  require_row(row, spec);
  double raw = 0.65 + 0.25 * std::abs(x(row, 1)) + 0.15 * std::abs(x(row, 2)) +
               0.15 * ind(x(row, 5) > 0.4) + 0.12 * ind(x(row, 12) > 1.0);
  if (spec.extended) {
    raw += 0.08 * x(row, 19) + 0.08 * ind(x(row, 24) == 2.0) + 0.08 * x(row, 27);
  }
  return std::max(raw, OutcomeModelSpec::kSigmaFloor);
}

double linear_predictor(std::span<const double> row, const OutcomeModelSpec& spec) {
  require_row(row, spec);
  const double x1 = x(row, 1), x2 = x(row, 2), x3 = x(row, 3), x6 = x(row, 6), x8 = x(row, 8);
  const double s11 = std::sin(x(row, 11));
  const bool x12_high = x(row, 12) > 1.1;
  double eta = 0.55 * x1 + 0.35 * x2 + 0.45 * (x3 * x3 - spec.x3_sq_mean) + 0.20 * x(row, 4) +
               0.35 * x(row, 5) + 0.25 * x6 + 0.15 * x(row, 7) + 0.18 * ind(x8 == 1.0) +
               0.28 * ind(x8 == 2.0) + 0.10 * x(row, 9) + 0.12 * x(row, 10) + 0.35 * s11 +
               0.22 * x12_high + 0.12 * (x2 * x2 * x2 - 3.0 * x2) + 0.18 * (x1 * x2) +
               0.18 * (x1 * x6) + 0.15 * (x3 * ind(x8 == 2.0)) + 0.12 * (s11 * x12_high);
  if (spec.extended) {
    const double x13 = x(row, 13), x14 = x(row, 14), x19 = x(row, 19), x20 = x(row, 20);
    const double x24 = x(row, 24);
    eta += 0.18 * x13 + 0.12 * x14 + 0.10 * std::sin(x(row, 15)) + 0.14 * ind(x(row, 16) > 0.0) +
           0.10 * x(row, 17) + 0.08 * ind(x(row, 18) > 0.5) + 0.12 * x19 + 0.10 * x20 -
           0.08 * x(row, 21) + 0.10 * x(row, 22) + 0.08 * x(row, 23) + 0.10 * ind(x24 == 2.0) +
           0.10 * ind(x(row, 25) == 3.0) + 0.08 * ind(x(row, 26) == 1.0) + 0.10 * x(row, 27) +
           0.12 * (x13 * x19) + 0.10 * (x14 * ind(x24 == 1.0)) + 0.10 * (x20 * x12_high);
  }
  return eta;
}

double inv_logit(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double true_probability(std::span<const double> row, const OutcomeModelSpec& spec) {
  return inv_logit(spec.intercept + linear_predictor(row, spec));
}

double calibrate_intercept(std::span<const double> eta, double target) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("prevalence target must lie in (0, 1)");
  if (eta.empty()) throw ConfigError("calibrate_intercept needs at least one row");
  auto prevalence = [&](double a) {
    double acc = 0.0;
    for (double e : eta) acc += inv_logit(a + e);
    return acc / static_cast<double>(eta.size());
  };
  double lo = -30.0, hi = 30.0;
  // Mean prevalence is strictly increasing in a, so bisection brackets the unique root.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (prevalence(mid) < target) lo = mid;
    else hi = mid;
  }
  const double a = 0.5 * (lo + hi);
  return std::abs(prevalence(lo) - target) < std::abs(prevalence(a) - target) ? lo : a;
}

OutcomeModelSpec make_outcome_model(const Design& design, OutcomeKind kind, double prevalence) {
  OutcomeModelSpec spec;
  spec.kind = kind;
  spec.extended = design.schema.extended();
  const auto x3 = design.full.col(2);
  double acc = 0.0;
  for (double v : x3) acc += v * v;
  spec.x3_sq_mean = acc / static_cast<double>(x3.size());
  if (kind == OutcomeKind::Binary) {
    std::vector<double> eta(design.rows());
    for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = linear_predictor(design.full.row(i), spec);
    spec.intercept = calibrate_intercept(eta, prevalence);
  }
  return spec;
}

std::vector<double> true_mean(const Matrix& full_rows, const OutcomeModelSpec& spec) {
  std::vector<double> out(full_rows.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = full_rows.row(i);
    out[i] = spec.kind == OutcomeKind::Binary ? true_probability(row, spec) : mu_continuous(row, spec);
  }
  return out;
}

OutcomeLaw true_law(const Matrix& full_rows, const OutcomeModelSpec& spec) {
  OutcomeLaw law;
  law.kind = spec.kind;
  law.location = true_mean(full_rows, spec);
  law.scale.assign(full_rows.rows(), 0.0);
  if (spec.kind == OutcomeKind::Continuous) {
    for (std::size_t i = 0; i < law.scale.size(); ++i)
      law.scale[i] = sigma_continuous(full_rows.row(i), spec);
  }
  return law;
}

std::vector<double> draw_outcomes(const Design& design, const OutcomeModelSpec& spec,
                                  std::uint64_t seed) {
  Rng rng(derive_key(seed, "outcome"));
  return rfcov::draw_outcomes(true_law(design.full, spec), rng);
}

Matrix make_test_points(const Design& design, std::size_t n_test, double jitter_sd,
                        std::uint64_t seed) {
  if (n_test == 0) throw ConfigError("make_test_points needs n_test >= 1");
  if (jitter_sd < 0.0) throw ConfigError("jitter sd must be non-negative");
  const auto mask = design.continuous_mask();
  Matrix out(n_test, design.full.cols());
  Rng rng(derive_key(seed, "test-points"));
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t t = 0; t < n_test; ++t) {
    const auto anchor = static_cast<std::size_t>(rng.below(design.rows()));
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double v = design.full(anchor, j);
      if (mask[j] && jitter_sd > 0.0) v += jitter_sd * z(rng);
      out(t, j) = v;
    }
  }
  return out;
}

}  // namespace rfcov::dgm
