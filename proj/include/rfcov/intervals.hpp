#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rfcov/outcome.hpp"

namespace rfcov::intervals {

/// Standard normal inverse CDF, prob in (0, 1).
double inverse_normal_cdf(double prob);

/// Upper alpha/2 standard normal quantile z_{alpha/2}. alpha in (0, 1];
/// alpha = 1 gives 0.
double normal_quantile(double alpha);

/// tree_variance / B + max(floor, 0). Requires B >= 2.
double operational_variance(double tree_variance, std::size_t num_trees, double floor);

struct IntervalEntry {
  double estimate = 0.0;
  /// Outcome noise sigma^2(x); always 0 for binary confidence intervals.
  double var_outcome = 0.0;
  /// tree_variance / B.
  double var_mc = 0.0;
  /// Clamped floor max(C_T, 0).
  double var_floor = 0.0;
  /// Floor as estimated, possibly negative.
  double floor_raw = 0.0;
  double var_total = 0.0;
  double z = 0.0;
  double alpha = 0.05;
  double lower = 0.0;
  double upper = 0.0;
  /// Endpoints clamped to [0, 1] for binary entries; equal to the raw ones
  /// otherwise.
  double lower_clamped = 0.0;
  double upper_clamped = 0.0;

  double width() const noexcept { return upper - lower; }
};

IntervalEntry prediction_interval_continuous(double estimate, double sigma2, double tree_variance,
                                             std::size_t num_trees, double floor, double alpha);

IntervalEntry confidence_interval_binary(double estimate, double tree_variance,
                                         std::size_t num_trees, double floor, double alpha);

struct IntervalReport {
  OutcomeKind kind = OutcomeKind::Continuous;
  double alpha = 0.05;
  std::size_t num_trees = 0;
  std::vector<IntervalEntry> entries;
};

}  // namespace rfcov::intervals
