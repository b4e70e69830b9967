#include "rfcov/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rfcov/error.hpp"

namespace rfcov::intervals {

namespace {

// Acklam's rational approximation, relative error about 1.15e-9.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw DataError(std::string(name) + " must be finite");
}

}  // namespace

double inverse_normal_cdf(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw ConfigError("probability must lie in (0, 1)");
  double x = acklam(prob);
  // One Halley step against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - prob;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double normal_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (alpha == 1.0) return 0.0;
  return -inverse_normal_cdf(alpha / 2.0);
}

double operational_variance(double tree_variance, std::size_t num_trees, double floor) {
  if (num_trees < 2) throw ConfigError("operational variance needs at least 2 trees");
  require_finite(tree_variance, "tree variance");
  require_finite(floor, "covariance floor");
  if (tree_variance < 0.0) throw DataError("tree variance must be non-negative");
  return tree_variance / static_cast<double>(num_trees) + std::max(floor, 0.0);
}

namespace {

IntervalEntry assemble(double estimate, double sigma2, double tree_variance, std::size_t num_trees,
                       double floor, double alpha) {
  require_finite(estimate, "estimate");
  require_finite(sigma2, "outcome variance");
  if (sigma2 < 0.0) throw DataError("outcome variance must be non-negative");
  (void)operational_variance(tree_variance, num_trees, floor);
  IntervalEntry e;
  e.estimate = estimate;
  e.var_outcome = sigma2;
  e.var_mc = tree_variance / static_cast<double>(num_trees);
  e.floor_raw = floor;
  e.var_floor = std::max(floor, 0.0);
  e.var_total = e.var_outcome + e.var_mc + e.var_floor;
  e.alpha = alpha;
  e.z = normal_quantile(alpha);
  const double half = e.z * std::sqrt(e.var_total);
  e.lower = estimate - half;
  e.upper = estimate + half;
  e.lower_clamped = e.lower;
  e.upper_clamped = e.upper;
  return e;
}

}  // namespace

IntervalEntry prediction_interval_continuous(double estimate, double sigma2, double tree_variance,
                                             std::size_t num_trees, double floor, double alpha) {
  return assemble(estimate, sigma2, tree_variance, num_trees, floor, alpha);
}

IntervalEntry confidence_interval_binary(double estimate, double tree_variance,
                                         std::size_t num_trees, double floor, double alpha) {
  if (!(estimate >= 0.0 && estimate <= 1.0)) throw DataError("probability estimate outside [0, 1]");
  IntervalEntry e = assemble(estimate, 0.0, tree_variance, num_trees, floor, alpha);
  e.lower_clamped = std::clamp(e.lower, 0.0, 1.0);
  e.upper_clamped = std::clamp(e.upper, 0.0, 1.0);
  return e;
}

}  // namespace rfcov::intervals
