// Desk-scale acceptance runner: one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria (capped at 1 for ctest).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "properties.hpp"
#include "rfcov/experiments.hpp"
#include "rfcov/stats.hpp"

using namespace rfcov;
using namespace rfcov::experiments;

namespace {

// Pinned tolerances.
constexpr double kRelFloor = 0.05;        // 1: large-B variance vs paired floor
constexpr double kSeMultiple = 3.0;       // 1, 2, 5: agreement in combined SEs
constexpr double kOneSided1pct = -2.326;  // 6: z quantile for the one-sided test
constexpr double kBinaryBias = 0.01;      // 7
constexpr double kCoverageLo = 0.92;      // 8
constexpr double kCoverageHi = 0.98;
constexpr double kFloorFreeMax = 0.50;    // 9
constexpr double kAlignmentLevel = 0.99;  // 10

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::size_t worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs <= budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("criterion %2d %s  %s: %s [%.1f s of %.0f s%s]\n", id, pass ? "PASS" : "FAIL", title,
              o.detail.c_str(), secs, budget_s, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

Scenario desk(const char* name, OutcomeKind kind, std::uint64_t seed) {
  Scenario s = preset(name, kind);
  s.seed = seed;
  s.threads = worker_threads();
  return s;
}

Outcome variance_identity() {
  Scenario s = desk("favorable", OutcomeKind::Continuous, 101);
  s.n = 200;
  s.n_test = 20;
  const auto inst = make_instance(s);
  const auto v = variance_vs_b(inst, s.forest, s.b_grid, 120, s.seed, s.threads);
  const auto& last = v.grid.back();
  const double rel = std::abs(last.variance.value - v.floor.value) / v.floor.value;
  const auto& one = v.grid.front();
  const double se = std::hypot(one.variance.se, v.tree_variance.se);
  const bool b1 = one.trees == 1 && std::abs(one.variance.value - v.tree_variance.value) <= kSeMultiple * se;
  return {rel <= kRelFloor && b1,
          "B=" + std::to_string(last.trees) + " variance " + num(last.variance.value) + " vs floor " +
              num(v.floor.value) + " (rel " + num(rel) + " <= " + num(kRelFloor) + "); B=1 " +
              num(one.variance.value) + " vs sigma_T^2 " + num(v.tree_variance.value) + " (|d|/se " +
              num(std::abs(one.variance.value - v.tree_variance.value) / se) + ")"};
}

Outcome total_variance() {
  const Scenario s = desk("favorable", OutcomeKind::Continuous, 102);
  const auto inst = make_instance(s);
  const auto d = single_tree_variance_decomposition(inst, s.forest, 40, 60, s.seed);
  const double se = std::hypot(d.sum.se, d.total.se);
  const double gap = std::abs(d.sum.value - d.total.value);
  return {gap <= kSeMultiple * se, "V_in " + num(d.v_in.value) + " + V_out " + num(d.v_out.value) +
                                       " = " + num(d.sum.value) + " vs sigma_T^2 " +
                                       num(d.total.value) + " (|d|/se " + num(gap / se) + ")"};
}

Outcome overlap() {
  bool ok = true;
  std::string detail;
  for (std::size_t q : {1u, 4u, 10u}) {
    const auto r = candidate_overlap_sim(10, q, 100000, derive_key(103, q));
    const bool pass = q == 10 ? (r.mean == r.expected && r.se == 0.0)
                              : std::abs(r.mean - r.expected) <= kSeMultiple * r.se;
    ok = ok && pass;
    detail += "q=" + std::to_string(q) + " " + num(r.mean) + " vs " + num(r.expected) + "; ";
  }
  return {ok, detail};
}

Outcome lipschitz() {
  const auto bad = props::lipschitz(10000, 104);
  return {bad == 0, std::to_string(bad) + " violations in 10000 probes"};
}

Outcome pasr_unbiased() {
  Scenario s = desk("favorable", OutcomeKind::Continuous, 105);
  s.n = 100;
  s.n_test = 20;
  const auto inst = make_instance(s);
  const auto o = oracle_true_ct(inst, s.forest, 120, 1500, derive_key(s.seed, "oracle"), s.threads);
  std::vector<double> oracle;
  for (const auto& e : o.paired_form) oracle.push_back(e.value);
  bool ok = true;
  std::string detail;
  for (std::size_t b_mc : {25u, 200u}) {
    Scenario run = s;
    run.pasr.mc_trees = b_mc;
    const auto b = bias_diagnostics(run, inst, oracle, 30, true, derive_key(s.seed, "runs", b_mc));
    std::size_t inside = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      const auto col = b.estimates.col(i);
      const double se = std::hypot(stats::standard_error(col), o.paired_form[i].se);
      const double z = std::abs(stats::mean(col) - oracle[i]) / se;
      worst = std::max(worst, z);
      if (z <= kSeMultiple) ++inside;
    }
    ok = ok && inside == oracle.size();
    detail += "B_mc=" + std::to_string(b_mc) + " mean bias " + num(b.mean) + ", " +
              std::to_string(inside) + "/" + std::to_string(oracle.size()) +
              " points within 3 SE (max " + num(worst) + "); ";
  }
  return {ok, detail};
}

Outcome bias(OutcomeKind kind, std::uint64_t seed) {
  const Scenario s = desk("favorable", kind, seed);
  const auto inst = make_instance(s);
  const auto o = oracle_true_ct(inst, s.forest, s.oracle_reps, s.oracle_trees,
                                derive_key(s.seed, "oracle"), s.threads);
  std::vector<double> oracle;
  for (const auto& e : o.paired_form) oracle.push_back(e.value);
  const auto b = bias_diagnostics(s, inst, oracle, 10, false, derive_key(s.seed, "bias"));
  const double se = std::hypot(b.se, o.paired_mean.se);
  if (kind == OutcomeKind::Continuous) {
    return {b.mean / se >= kOneSided1pct, "mean bias " + num(b.mean) + " (se " + num(se) + ", z " +
                                              num(b.mean / se) + " >= " + num(kOneSided1pct) +
                                              "), median " + num(b.median)};
  }
  return {std::abs(b.mean) <= kBinaryBias,
          "mean bias " + num(b.mean) + " (se " + num(se) + "), |bias| <= " + num(kBinaryBias)};
}

Outcome coverage() {
  bool ok = true;
  std::string detail;
  for (auto kind : {OutcomeKind::Continuous, OutcomeKind::Binary}) {
    const Scenario s = desk("favorable", kind, 108);
    const auto c = coverage_study(s, make_instance(s));
    ok = ok && c.coverage >= kCoverageLo && c.coverage <= kCoverageHi;
    detail += std::string(to_string(kind)) + " " + num(c.coverage) + " (se " + num(c.se) + "); ";
  }
  return {ok, detail + "band [" + num(kCoverageLo) + ", " + num(kCoverageHi) + "]"};
}

Outcome floor_free() {
  Scenario s = desk("favorable", OutcomeKind::Binary, 109);
  s.forest.num_trees = 2000;
  const auto c = coverage_study(s, make_instance(s), FloorMode::Zero);
  return {c.coverage < kFloorFreeMax,
          "coverage without floor " + num(c.coverage) + " < " + num(kFloorFreeMax) +
              ", mean width " + num(c.mean_width)};
}

Outcome alignment() {
  const Scenario s = desk("favorable", OutcomeKind::Continuous, 110);
  auto c = s.forest;
  c.num_trees = s.alignment_trees;
  const auto rows = alignment_probe(make_instance(s), c, {1, 4, 10}, 120, s.seed, s.threads,
                                    kAlignmentLevel);
  bool positive = true, monotone = true;
  std::string detail;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    positive = positive && rows[k].ci_low > 0.0;
    if (k > 0) {
      monotone = monotone && rows[k].covariance >=
                                 rows[k - 1].covariance - kSeMultiple * std::hypot(rows[k].se, rows[k - 1].se);
    }
    detail += "q=" + std::to_string(rows[k].q) + " cov " + num(rows[k].covariance) + " 99% CI [" +
              num(rows[k].ci_low) + ", " + num(rows[k].ci_high) + "]; ";
  }
  return {positive && monotone,
          detail + (positive ? "positive" : "not positive") + ", " + (monotone ? "monotone" : "not monotone")};
}

Outcome properties() {
  const std::size_t n = 1000;
  const auto a = props::weight_simplex(n, 111);
  const auto b = props::weight_identity(n, 111);
  const auto c = props::occupancy(n, 111);
  const auto d = props::thread_determinism(n, 111);
  const auto e = props::scale_equivariance(n, 111);
  return {a + b + c + d + e == 0,
          "violations over 1000 cases each: simplex " + std::to_string(a) + ", identity " +
              std::to_string(b) + ", occupancy " + std::to_string(c) + ", threads " +
              std::to_string(d) + ", scale " + std::to_string(e)};
}

}  // namespace

int main() {
  std::printf("acceptance (desk scale, %zu worker threads)\n", worker_threads());
  criterion(1, "variance identity", 300, variance_identity);
  criterion(2, "law of total variance", 180, total_variance);
  criterion(3, "candidate overlap", 1, overlap);
  criterion(4, "Lipschitz stability", 30, lipschitz);
  criterion(5, "PASR unbiasedness under the true law", 600, pasr_unbiased);
  criterion(6, "conservative continuous floor", 900, [] { return bias(OutcomeKind::Continuous, 106); });
  criterion(7, "binary near-unbiasedness", 900, [] { return bias(OutcomeKind::Binary, 107); });
  criterion(8, "interval coverage", 1800, coverage);
  criterion(9, "floor-free ablation", 600, floor_free);
  criterion(10, "alignment without overlap", 300, alignment);
  criterion(11, "engine properties", 120, properties);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
