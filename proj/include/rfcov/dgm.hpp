#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rfcov/matrix.hpp"
#include "rfcov/outcome.hpp"

namespace rfcov::dgm {

enum class ColumnKind { Continuous, Binary, Categorical };

struct ColumnSpec {
  ColumnKind kind = ColumnKind::Continuous;
  int levels = 0;            // categorical only
  std::string distribution;  // human-readable tag, e.g. "normal(0,1.44)"
  bool latent_mixing = false;
};

/// Column layout of the simulation design. The design always carries every
/// column the outcome functions read; only the first `p_observed` columns are
/// exposed to forests. For p = 10 this keeps x11 and x12 as fixed latent
/// design columns that shape the outcome but are never split on.
struct PredictorSchema {
  std::size_t p_observed = 0;
  std::vector<ColumnSpec> columns;

  /// Outcome functions include the x13..x27 terms.
  bool extended() const noexcept { return columns.size() >= 27; }

  /// Supported layouts: p == 10 or p >= 30 (x28.. are latent-factor noise).
  /// Throws ConfigError for any other p.
  static PredictorSchema standard(std::size_t p);
  /// Core-only layout with the first p (1..12) columns observed.
  static PredictorSchema core_subset(std::size_t p);
};

/// Realized covariates. `full` has one column per schema entry.
struct Design {
  PredictorSchema schema;
  Matrix full;

  std::size_t rows() const noexcept { return full.rows(); }
  Matrix observed() const { return full.leading_cols(schema.p_observed); }
  std::vector<bool> continuous_mask() const;
};

/// Centers and scales to sample mean 0 and sample variance 1 (divisor n-1).
/// Constant columns are only centered.
void standardize(std::span<double> column);

Design gen_predictors(std::size_t n, std::size_t p, std::uint64_t seed);
Design gen_predictors(std::size_t n, const PredictorSchema& schema, std::uint64_t seed);

/// Outcome model fitted to a realized design: centering constant for the
/// squared x3 term and, for binary outcomes, the calibrated intercept.
struct OutcomeModelSpec {
  OutcomeKind kind = OutcomeKind::Continuous;
  bool extended = false;
  double x3_sq_mean = 0.0;
  double intercept = 0.0;

  static constexpr double kSigmaFloor = 0.15;
  static constexpr double kPrevalence = 0.40;
};

/// Rows passed to the outcome functions are full design rows (length >= 12,
/// or >= 27 when extended).
double mu_continuous(std::span<const double> row, const OutcomeModelSpec& spec);
double sigma_continuous(std::span<const double> row, const OutcomeModelSpec& spec);
double linear_predictor(std::span<const double> row, const OutcomeModelSpec& spec);
double true_probability(std::span<const double> row, const OutcomeModelSpec& spec);

double inv_logit(double t) noexcept;

/// Solves mean(inv_logit(a + eta_i)) = target for a by bisection on [-30, 30].
double calibrate_intercept(std::span<const double> eta, double target = 0.40);

OutcomeModelSpec make_outcome_model(const Design& design, OutcomeKind kind,
                                    double prevalence = OutcomeModelSpec::kPrevalence);

/// Conditional law of Y at each row of a full-design matrix.
OutcomeLaw true_law(const Matrix& full_rows, const OutcomeModelSpec& spec);

/// Conditional mean (continuous) or success probability (binary) per row.
std::vector<double> true_mean(const Matrix& full_rows, const OutcomeModelSpec& spec);

std::vector<double> draw_outcomes(const Design& design, const OutcomeModelSpec& spec,
                                  std::uint64_t seed);

/// Evaluation points per scenario in the full-scale harness.
inline constexpr std::size_t kDefaultTestPoints = 400;

/// Anchored jittered cloud: rows resampled with replacement from the design,
/// Gaussian jitter on continuous columns only. Returns full-design rows.
Matrix make_test_points(const Design& design, std::size_t n_test, double jitter_sd,
                        std::uint64_t seed);

}  // namespace rfcov::dgm
