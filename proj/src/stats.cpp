#include "rfcov/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfcov/error.hpp"

namespace rfcov::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw DataError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) { return covariance(x, x); }

double covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("covariance of samples with different lengths");
  if (a.size() < 2) throw DataError("covariance needs at least two observations");
  const double ma = mean(a);
  const double mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

double standard_error(std::span<const double> x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

std::vector<double> covariance_leave_one_out(std::span<const double> a,
                                             std::span<const double> b) {
  const std::size_t n = a.size();
  if (b.size() != n) throw DataError("covariance of samples with different lengths");
  if (n < 3) throw DataError("delete-one covariances need at least three observations");
  const double ma = mean(a);
  const double mb = mean(b);
  double sa = 0.0;
  double sb = 0.0;
  double sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i] - ma;
    sb += b[i] - mb;
    sab += (a[i] - ma) * (b[i] - mb);
  }
  const double m = static_cast<double>(n - 1);
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    loo[i] = (sab - da * db - (sa - da) * (sb - db) / m) / (m - 1.0);
  }
  return loo;
}

double jackknife_se(std::span<const double> leave_one_out) {
  const auto n = static_cast<double>(leave_one_out.size());
  if (leave_one_out.size() < 2) return 0.0;
  const double centre = mean(leave_one_out);
  double ss = 0.0;
  for (double v : leave_one_out) ss += (v - centre) * (v - centre);
  return std::sqrt((n - 1.0) / n * ss);
}

Estimate covariance_jackknife(std::span<const double> a, std::span<const double> b) {
  Estimate out;
  out.value = covariance(a, b);
  if (a.size() >= 3) out.se = jackknife_se(covariance_leave_one_out(a, b));
  return out;
}

Estimate mean_covariance_jackknife(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.cols() == 0) {
    throw DataError("mismatched replicate matrices");
  }
  const std::size_t rows = a.rows();
  const auto cols = static_cast<double>(a.cols());
  Estimate out;
  std::vector<double> loo(rows, 0.0);
  for (std::size_t i = 0; i < a.cols(); ++i) {
    out.value += covariance(a.col(i), b.col(i)) / cols;
    if (rows >= 3) {
      const auto col_loo = covariance_leave_one_out(a.col(i), b.col(i));
      for (std::size_t r = 0; r < rows; ++r) loo[r] += col_loo[r] / cols;
    }
  }
  if (rows >= 3) out.se = jackknife_se(loo);
  return out;
}

Estimate mean_variance_jackknife(const Matrix& a) { return mean_covariance_jackknife(a, a); }

double correlation(std::span<const double> a, std::span<const double> b) {
  const double va = variance(a);
  const double vb = variance(b);
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return covariance(a, b) / std::sqrt(va * vb);
}

Estimate variance_jackknife(std::span<const double> x) { return covariance_jackknife(x, x); }

double quantile(std::vector<double> x, double prob) {
  if (x.empty()) throw DataError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = std::clamp(prob, 0.0, 1.0) * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::pair<double, double> bootstrap_mean_ci(std::span<const double> x, double level,
                                            std::size_t resamples, Rng& rng) {
  if (x.empty()) throw DataError("bootstrap of an empty sample");
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[rng.below(x.size())];
    m = s / static_cast<double>(x.size());
  }
  const double tail = (1.0 - level) / 2.0;
  return {quantile(means, tail), quantile(means, 1.0 - tail)};
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const double vx = variance(x);
  if (vx == 0.0) throw DataError("line fit needs at least two distinct x values");
  LineFit fit;
  fit.slope = covariance(x, y) / vx;
  fit.intercept = mean(y) - fit.slope * mean(x);
  return fit;
}

}  // namespace rfcov::stats
