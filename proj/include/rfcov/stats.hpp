#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rfcov/matrix.hpp"
#include "rfcov/rng.hpp"

namespace rfcov::stats {

double mean(std::span<const double> x);
/// Sample variance, divisor n-1. Requires n >= 2.
double variance(std::span<const double> x);
/// Sample covariance, divisor n-1. Requires n >= 2 and equal lengths.
double covariance(std::span<const double> a, std::span<const double> b);
/// Standard error of the mean, sd / sqrt(n).
double standard_error(std::span<const double> x);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Sample covariance with its delete-one jackknife standard error.
Estimate covariance_jackknife(std::span<const double> a, std::span<const double> b);
/// Sample variance with its delete-one jackknife standard error.
Estimate variance_jackknife(std::span<const double> x);

/// Delete-one sample covariances; entry r leaves observation r out. n >= 3.
std::vector<double> covariance_leave_one_out(std::span<const double> a, std::span<const double> b);

/// Jackknife SE from delete-one replicates of a statistic.
double jackknife_se(std::span<const double> leave_one_out);

/// Covariance of columns a_i, b_i across rows, averaged over columns, with a
/// jackknife SE that deletes whole rows.
Estimate mean_covariance_jackknife(const Matrix& a, const Matrix& b);
Estimate mean_variance_jackknife(const Matrix& a);

double correlation(std::span<const double> a, std::span<const double> b);

/// Linear interpolation quantile (type 7), prob in [0, 1].
double quantile(std::vector<double> x, double prob);

/// Percentile bootstrap interval for the mean.
std::pair<double, double> bootstrap_mean_ci(std::span<const double> x, double level,
                                            std::size_t resamples, Rng& rng);

/// Least-squares fit y = intercept + slope * x.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace rfcov::stats
