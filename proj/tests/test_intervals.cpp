#include <doctest.h>

#include <cmath>

#include "rfcov/error.hpp"
#include "rfcov/intervals.hpp"

using namespace rfcov;
using namespace rfcov::intervals;

namespace {

// Upper tail of the standard normal in long double, by the Taylor series of
// erf for small z and the continued fraction of erfc otherwise.
long double upper_tail(long double z) {
  const long double x = z / std::sqrt(2.0L);
  if (x < 3.0L) {
    long double term = x, sum = x;
    for (int k = 1; k < 200; ++k) {
      term *= -x * x / k;
      sum += term / (2 * k + 1);
    }
    const long double erf = 2.0L / std::sqrt(3.14159265358979323846264338327950288L) * sum;
    return 0.5L * (1.0L - erf);
  }
  long double f = 0.0L;
  for (int k = 200; k >= 1; --k) f = (k / 2.0L) / (x + f);
  return 0.5L * std::exp(-x * x) / (std::sqrt(3.14159265358979323846264338327950288L) * (x + f));
}

// z with upper_tail(z) = alpha / 2, by bisection.
long double z_oracle(long double alpha) {
  long double lo = 0.0L, hi = 40.0L;
  for (int it = 0; it < 200; ++it) {
    const long double mid = 0.5L * (lo + hi);
    (upper_tail(mid) > alpha / 2 ? lo : hi) = mid;
  }
  return 0.5L * (lo + hi);
}

}  // namespace

TEST_CASE("normal quantile against a high-precision oracle") {
  const double oracle = double(z_oracle(0.05L));
  CHECK(std::abs(oracle - 1.959964) < 1e-6);
  CHECK(std::abs(normal_quantile(0.05) - oracle) < 1e-12);
  for (double a : {1e-10, 1e-6, 0.001, 0.01, 0.1, 0.2, 0.5, 0.9, 0.99})
    CHECK(std::abs(normal_quantile(a) - double(z_oracle(a))) < 1e-9 * (1.0 + double(z_oracle(a))));
}

TEST_CASE("normal quantile round trip at one standard deviation") {
  const double alpha = std::erfc(1.0 / std::sqrt(2.0));  // 2 Phi(-1) = 0.3173...
  CHECK(alpha == doctest::Approx(0.3173105078629141));
  CHECK(normal_quantile(alpha) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normal_quantile(1.0) == 0.0);
  CHECK(inverse_normal_cdf(0.5) == 0.0);
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
  CHECK_THROWS_AS(normal_quantile(0.0), ConfigError);
  CHECK_THROWS_AS(normal_quantile(1.5), ConfigError);
  CHECK_THROWS_AS(normal_quantile(std::nan("")), ConfigError);
}

TEST_CASE("operational variance") {
  CHECK(operational_variance(0.8, 2000, 0.3) == doctest::Approx(0.3004).epsilon(1e-14));
  CHECK(operational_variance(0.8, 2000, -0.01) == doctest::Approx(0.8 / 2000).epsilon(1e-14));
  CHECK(operational_variance(0.0, 500, 0.0) == 0.0);
  CHECK_THROWS_AS(operational_variance(0.1, 1, 0.0), ConfigError);
}

TEST_CASE("continuous prediction interval") {
  const auto e = prediction_interval_continuous(1.0, 1.0, 0.0, 500, 0.0, 0.05);
  CHECK(e.lower == doctest::Approx(1.0 - 1.959964).epsilon(1e-6));
  CHECK(e.upper == doctest::Approx(1.0 + 1.959964).epsilon(1e-6));
  const auto zero = prediction_interval_continuous(0.7, 0.0, 0.0, 500, 0.0, 0.05);
  CHECK(zero.lower == 0.7);
  CHECK(zero.upper == 0.7);
  const auto c = prediction_interval_continuous(0.2, 0.9, 2.5, 250, -0.02, 0.1);
  CHECK(c.var_outcome + c.var_mc + c.var_floor == c.var_total);
  CHECK(c.var_floor == 0.0);
  CHECK(c.floor_raw == -0.02);
  CHECK(c.lower_clamped == c.lower);
  CHECK(c.upper - c.estimate == doctest::Approx(c.z * std::sqrt(c.var_total)));
}

TEST_CASE("binary confidence interval") {
  const double z = normal_quantile(0.05);
  const double v = (0.05 / z) * (0.05 / z);
  const auto e = confidence_interval_binary(0.02, 0.0, 500, v, 0.05);
  CHECK(e.lower == doctest::Approx(-0.03).epsilon(1e-12));
  CHECK(e.lower_clamped == 0.0);
  CHECK(e.upper_clamped == doctest::Approx(0.07));
  CHECK(e.var_outcome == 0.0);
  const auto degenerate = confidence_interval_binary(0.4, 0.0, 500, 0.0, 0.05);
  CHECK(degenerate.lower == 0.4);
  CHECK(degenerate.upper == 0.4);
  // Width depends only on the Monte Carlo and floor terms.
  const auto a = confidence_interval_binary(0.5, 0.3, 100, 0.01, 0.05);
  const auto b = confidence_interval_binary(0.1, 0.3, 100, 0.01, 0.05);
  CHECK(a.width() == doctest::Approx(b.width()));
  CHECK(a.var_total == doctest::Approx(0.003 + 0.01));
  const auto high = confidence_interval_binary(0.99, 0.0, 100, 0.01, 0.05);
  CHECK(high.upper_clamped == 1.0);
  CHECK(high.upper > 1.0);
}
