#include "rfcov/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rfcov/csv.hpp"
#include "rfcov/error.hpp"
#include "rfcov/intervals.hpp"
#include "rfcov/parallel.hpp"

namespace rfcov::experiments {

using forest::ForestConfig;

void Scenario::validate() const {
  if (n == 0) throw ConfigError("scenario n must be at least 1");
  forest.validate(n, p);
  pasr.validate();
  if (n_test == 0) throw ConfigError("n_test must be at least 1");
  if (!(jitter_sd >= 0.0)) throw ConfigError("jitter_sd must be non-negative");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (oracle_reps < 2) throw ConfigError("oracle_reps must be at least 2");
  if (oracle_trees < 1) throw ConfigError("oracle_trees must be at least 1");
  if (coverage_reps < 1) throw ConfigError("coverage_reps must be at least 1");
  if (datasets < 2) throw ConfigError("datasets must be at least 2");
  if (b_grid.empty()) throw ConfigError("b_grid must not be empty");
  for (auto b : b_grid) {
    if (b == 0) throw ConfigError("b_grid entries must be at least 1");
  }
  if (inbag_reps < 2 || inner_reps < 2) throw ConfigError("inbag_reps and inner_reps must be at least 2");
  if (overlap_trials < 1) throw ConfigError("overlap_trials must be at least 1");
  if (alignment_trees < 1) throw ConfigError("alignment_trees must be at least 1");
}

Scenario preset(std::string_view name, OutcomeKind kind) {
  Scenario s;
  s.name = std::string(name);
  s.kind = kind;
  s.forest.num_trees = 500;
  s.forest.sampling = forest::Sampling::Bootstrap;
  s.forest.min_leaf = kind == OutcomeKind::Binary ? 2 : 1;
  if (name == "favorable") {
    s.n = 400;
    s.p = 10;
    s.forest.candidates = 4;
  } else if (name == "challenging") {
    s.n = 200;
    s.p = 30;
    s.forest.candidates = 6;
  } else if (name == "stress") {
    s.n = 200;
    s.p = 200;
    s.forest.candidates = 15;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) +
                      "' (expected favorable, challenging or stress)");
  }
  return s;
}

std::vector<std::string> preset_names() { return {"favorable", "challenging", "stress"}; }

void to_json(Json& j, const Scenario& s) {
  j = Json{{"name", s.name},
           {"n", s.n},
           {"p", s.p},
           {"kind", std::string(to_string(s.kind))},
           {"forest", s.forest},
           {"pasr", s.pasr},
           {"n_test", s.n_test},
           {"jitter_sd", s.jitter_sd},
           {"alpha", s.alpha},
           {"oracle_reps", s.oracle_reps},
           {"oracle_trees", s.oracle_trees},
           {"coverage_reps", s.coverage_reps},
           {"datasets", s.datasets},
           {"b_grid", s.b_grid},
           {"inbag_reps", s.inbag_reps},
           {"inner_reps", s.inner_reps},
           {"overlap_trials", s.overlap_trials},
           {"alignment_trees", s.alignment_trees},
           {"seed", s.seed},
           {"threads", s.threads}};
}

void from_json(const Json& j, Scenario& s) {
  require_known_keys(j,
                     {"name", "n", "p", "kind", "forest", "pasr", "n_test", "jitter_sd", "alpha",
                      "oracle_reps", "oracle_trees", "coverage_reps", "datasets", "b_grid",
                      "inbag_reps", "inner_reps", "overlap_trials", "alignment_trees", "seed",
                      "threads"},
                     "scenario");
  try {
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = get_checked<std::remove_reference_t<decltype(field)>>(j.at(key));
    };
    take("name", s.name);
    take("n", s.n);
    take("p", s.p);
    if (j.contains("kind")) s.kind = parse_outcome_kind(j.at("kind").get<std::string>());
    if (j.contains("forest")) forest::from_json(j.at("forest"), s.forest);
    if (j.contains("pasr")) pasr::from_json(j.at("pasr"), s.pasr);
    take("n_test", s.n_test);
    take("jitter_sd", s.jitter_sd);
    take("alpha", s.alpha);
    take("oracle_reps", s.oracle_reps);
    take("oracle_trees", s.oracle_trees);
    take("coverage_reps", s.coverage_reps);
    take("datasets", s.datasets);
    take("b_grid", s.b_grid);
    take("inbag_reps", s.inbag_reps);
    take("inner_reps", s.inner_reps);
    take("overlap_trials", s.overlap_trials);
    take("alignment_trees", s.alignment_trees);
    take("seed", s.seed);
    take("threads", s.threads);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

Instance make_instance(const Scenario& scenario) { return make_instance(scenario, scenario.n_test); }

Instance make_instance(const Scenario& scenario, std::size_t n_test) {
  auto design = dgm::gen_predictors(scenario.n, scenario.p, derive_key(scenario.seed, "design"));
  auto model = dgm::make_outcome_model(design, scenario.kind);
  auto points = dgm::make_test_points(design, n_test, scenario.jitter_sd,
                                      derive_key(scenario.seed, "points"));
  auto law = dgm::true_law(design.full, model);
  auto point_law = dgm::true_law(points, model);
  forest::TrainingFrame frame(design.observed());
  return Instance{std::move(design), model, std::move(frame), std::move(points), std::move(law),
                  std::move(point_law)};
}

namespace {

std::vector<double> draw(const OutcomeLaw& law, std::uint64_t key) {
  Rng rng(key);
  return draw_outcomes(law, rng);
}

std::vector<double> means_at(const Instance& inst, std::span<const double> y,
                             const ForestConfig& config, std::size_t threads = 1,
                             std::span<const std::uint32_t> eligible = {}) {
  return forest::forest_means(
      forest::tree_predictions(inst.frame, y, config, inst.points, threads, eligible));
}

void set_row(Matrix& m, std::size_t r, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) m(r, i) = values[i];
}

}  // namespace

OracleResult oracle_true_ct(const Instance& inst, const ForestConfig& config, std::size_t reps,
                            std::size_t trees, std::uint64_t seed, std::size_t threads) {
  if (reps < 2) throw ConfigError("oracle needs at least 2 replications");
  const std::size_t P = inst.points.rows();
  Matrix common(reps, P);
  Matrix a(reps, P);
  Matrix b(reps, P);
  ForestConfig shared = config;
  shared.num_trees = trees;
  shared.seed = derive_key(seed, "oracle", "common");
  shared.validate(inst.frame.rows(), inst.frame.cols());
  parallel_for(reps, threads, [&](std::size_t r) {
    const auto y = draw(inst.law, derive_key(seed, "oracle", "y", r));
    set_row(common, r, means_at(inst, y, shared));
    ForestConfig ca = shared;
    ca.seed = derive_key(seed, "oracle", r, "A");
    set_row(a, r, means_at(inst, y, ca));
    ForestConfig cb = shared;
    cb.seed = derive_key(seed, "oracle", r, "B");
    set_row(b, r, means_at(inst, y, cb));
  });
  OracleResult out;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < P; ++i) {
    out.variance_form.push_back(stats::variance_jackknife(common.col(i)));
    out.paired_form.push_back(stats::covariance_jackknife(a.col(i), b.col(i)));
    const double gap = std::abs(out.variance_form[i].value - out.paired_form[i].value);
    const double se = std::hypot(out.variance_form[i].se, out.paired_form[i].se);
    if (gap <= 3.0 * se) ++agree;
  }
  out.agreement = static_cast<double>(agree) / static_cast<double>(P);
  out.paired_mean = stats::mean_covariance_jackknife(a, b);
  return out;
}

VarianceVsBResult variance_vs_b(const Instance& inst, const ForestConfig& config,
                                const std::vector<std::size_t>& b_grid, std::size_t reps,
                                std::uint64_t seed, std::size_t threads) {
  if (reps < 3) throw ConfigError("variance_vs_b needs at least 3 replications");
  if (b_grid.empty()) throw ConfigError("b_grid must not be empty");
  const std::size_t P = inst.points.rows();
  const std::size_t b_max = *std::max_element(b_grid.begin(), b_grid.end());
  std::vector<Matrix> by_b(b_grid.size(), Matrix(reps, P));
  Matrix full_a(reps, P);
  Matrix full_b(reps, P);
  Matrix single(reps, P);
  ForestConfig base = config;
  base.num_trees = b_max;
  base.validate(inst.frame.rows(), inst.frame.cols());

  parallel_for(reps, threads, [&](std::size_t r) {
    const auto y = draw(inst.law, derive_key(seed, "vb", "y", r));
    ForestConfig ca = base;
    ca.seed = derive_key(seed, "vb", r, "A");
    const Matrix per_tree =
        forest::tree_predictions(inst.frame, y, ca, inst.points);
    for (std::size_t i = 0; i < P; ++i) {
      const auto column = per_tree.col(i);
      double running = 0.0;
      std::size_t used = 0;
      std::vector<double> prefix(b_max + 1, 0.0);
      for (std::size_t t = 0; t < b_max; ++t) {
        running += column[t];
        prefix[++used] = running;
      }
      for (std::size_t g = 0; g < b_grid.size(); ++g) {
        by_b[g](r, i) = prefix[b_grid[g]] / static_cast<double>(b_grid[g]);
      }
      full_a(r, i) = prefix[b_max] / static_cast<double>(b_max);
    }
    ForestConfig cb = base;
    cb.seed = derive_key(seed, "vb", r, "B");
    set_row(full_b, r, means_at(inst, y, cb));

    const auto y_single = draw(inst.law, derive_key(seed, "vb", "single-y", r));
    ForestConfig one = base;
    one.num_trees = 1;
    one.seed = derive_key(seed, "vb", "single", r);
    set_row(single, r, means_at(inst, y_single, one));
  });

  VarianceVsBResult out;
  out.floor = stats::mean_covariance_jackknife(full_a, full_b);
  out.tree_variance = stats::mean_variance_jackknife(single);
  std::vector<double> inv_b;
  std::vector<double> values;
  for (std::size_t g = 0; g < b_grid.size(); ++g) {
    VarianceByB row;
    row.trees = b_grid[g];
    row.variance = stats::mean_variance_jackknife(by_b[g]);
    const auto B = static_cast<double>(b_grid[g]);
    row.theory = out.tree_variance.value / B + (B - 1.0) / B * out.floor.value;
    out.grid.push_back(row);
    inv_b.push_back(1.0 / B);
    values.push_back(row.variance.value);
  }
  if (b_grid.size() >= 2) {
    const auto fit = stats::fit_line(inv_b, values);
    out.fit_floor = fit.intercept;
    out.fit_tree_variance = fit.intercept + fit.slope;
    for (std::size_t g = 0; g < b_grid.size(); ++g) {
      auto& row = out.grid[g];
      row.fitted = fit.intercept + fit.slope * inv_b[g];
      if (row.fitted != 0.0) {
        out.max_relative_residual = std::max(
            out.max_relative_residual, std::abs(row.variance.value - row.fitted) / std::abs(row.fitted));
      }
    }
  }
  return out;
}

Decomposition single_tree_variance_decomposition(const Instance& inst, const ForestConfig& config,
                                                 std::size_t inbag_reps, std::size_t inner_reps,
                                                 std::uint64_t seed) {
  if (inbag_reps < 3 || inner_reps < 2) {
    throw ConfigError("decomposition needs inbag_reps >= 3 and inner_reps >= 2");
  }
  const std::size_t n = inst.frame.rows();
  const std::size_t P = inst.points.rows();
  const std::size_t K = inbag_reps;
  const std::size_t M = inner_reps;
  config.validate(n, inst.frame.cols());
  const auto rows = inst.points.row_major();
  const std::size_t stride = inst.points.cols();
  forest::TreeGrower grower(inst.frame);

  auto predict_into = [&](const forest::Tree& tree, Matrix& out, std::size_t r) {
    for (std::size_t i = 0; i < P; ++i) {
      out(r, i) = tree.leaf_values[tree.leaf_of(rows.data() + i * stride)];
    }
  };

  Matrix within(K, P);
  Matrix means(K, P);
  Matrix draws(M, P);
  for (std::size_t k = 0; k < K; ++k) {
    Rng inbag_rng(derive_key(seed, "decomp", "inbag", k));
    const auto inbag = forest::draw_inbag(config, n, inbag_rng);
    for (std::size_t m = 0; m < M; ++m) {
      const auto y = draw(inst.law, derive_key(seed, "decomp", "y", k, m));
      Rng split(derive_key(seed, "decomp", "split", k, m));
      predict_into(grower.grow(y, inbag, config, split, false), draws, m);
    }
    for (std::size_t i = 0; i < P; ++i) {
      within(k, i) = stats::variance(draws.col(i));
      means(k, i) = stats::mean(draws.col(i));
    }
  }

  Matrix total(K * M, P);
  for (std::size_t t = 0; t < K * M; ++t) {
    Rng rng(derive_key(seed, "decomp", "total", t));
    auto inbag = forest::draw_inbag(config, n, rng);
    const auto y = draw(inst.law, derive_key(seed, "decomp", "total-y", t));
    predict_into(grower.grow(y, std::move(inbag), config, rng, false), total, t);
  }

  const auto Md = static_cast<double>(M);
  // Components at point i from all realizations except `skip` (K for none).
  auto components = [&](std::size_t i, std::size_t skip) {
    std::vector<double> w;
    std::vector<double> mu;
    for (std::size_t k = 0; k < K; ++k) {
      if (k == skip) continue;
      w.push_back(within(k, i));
      mu.push_back(means(k, i));
    }
    const double v_in = stats::mean(w);
    const double v_out = stats::variance(mu) - v_in / Md;
    return std::pair{v_in, v_out};
  };

  Decomposition out;
  const auto Pd = static_cast<double>(P);
  std::vector<double> loo_in(K, 0.0);
  std::vector<double> loo_out(K, 0.0);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < P; ++i) {
    const auto [v_in, v_out] = components(i, K);
    out.v_in_by_point.push_back(v_in);
    out.v_out_by_point.push_back(v_out);
    const auto tot = stats::variance_jackknife(total.col(i));
    out.total_by_point.push_back(tot.value);
    out.v_in.value += v_in / Pd;
    out.v_out.value += v_out / Pd;
    std::vector<double> loo_sum(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto [li, lo] = components(i, k);
      loo_in[k] += li / Pd;
      loo_out[k] += lo / Pd;
      loo_sum[k] = li + lo;
    }
    const double se = std::hypot(stats::jackknife_se(loo_sum), tot.se);
    if (std::abs(v_in + v_out - tot.value) <= 3.0 * se) ++agree;
  }
  std::vector<double> loo_sum(K);
  for (std::size_t k = 0; k < K; ++k) loo_sum[k] = loo_in[k] + loo_out[k];
  out.v_in.se = stats::jackknife_se(loo_in);
  out.v_out.se = stats::jackknife_se(loo_out);
  out.sum.value = out.v_in.value + out.v_out.value;
  out.sum.se = stats::jackknife_se(loo_sum);
  out.total = stats::mean_variance_jackknife(total);
  out.pointwise_agreement = static_cast<double>(agree) / Pd;
  return out;
}

OverlapResult candidate_overlap_sim(std::size_t p, std::size_t q, std::size_t trials,
                                    std::uint64_t seed) {
  if (q < 1 || q > p) throw ConfigError("candidate overlap needs 1 <= q <= p");
  if (trials < 1) throw ConfigError("candidate overlap needs at least one trial");
  Rng rng(derive_key(seed, "overlap", p, q));
  std::vector<std::uint32_t> first(p);
  std::vector<std::uint32_t> second(p);
  std::iota(first.begin(), first.end(), 0U);
  std::iota(second.begin(), second.end(), 0U);
  std::vector<std::size_t> stamp(p, 0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t t = 1; t <= trials; ++t) {
    for (std::size_t k = 0; k < q; ++k) {
      std::swap(first[k], first[k + rng.below(p - k)]);
      stamp[first[k]] = t;
    }
    std::size_t shared = 0;
    for (std::size_t k = 0; k < q; ++k) {
      std::swap(second[k], second[k + rng.below(p - k)]);
      shared += stamp[second[k]] == t ? 1 : 0;
    }
    const auto v = static_cast<double>(shared);
    sum += v;
    sum_sq += v * v;
  }
  OverlapResult out;
  out.p = p;
  out.q = q;
  out.trials = trials;
  const auto T = static_cast<double>(trials);
  out.mean = sum / T;
  if (trials > 1) {
    const double var = std::max(0.0, (sum_sq - T * out.mean * out.mean) / (T - 1.0));
    out.se = std::sqrt(var / T);
  }
  out.expected = static_cast<double>(q * q) / static_cast<double>(p);
  return out;
}

std::vector<AlignmentRow> alignment_probe(const Instance& inst, const ForestConfig& config,
                                          const std::vector<std::size_t>& q_values,
                                          std::size_t reps, std::uint64_t seed,
                                          std::size_t threads, double level) {
  const std::size_t n = inst.frame.rows();
  if (n % 2 != 0) throw ConfigError("alignment probe needs an even number of rows");
  if (reps < 3) throw ConfigError("alignment probe needs at least 3 replications");
  std::vector<std::uint32_t> index(n);
  std::iota(index.begin(), index.end(), 0U);
  Rng split_rng(derive_key(seed, "align", "split"));
  std::shuffle(index.begin(), index.end(), split_rng);
  std::vector<std::uint32_t> half_a(index.begin(), index.begin() + static_cast<std::ptrdiff_t>(n / 2));
  std::vector<std::uint32_t> half_b(index.begin() + static_cast<std::ptrdiff_t>(n / 2), index.end());
  std::sort(half_a.begin(), half_a.end());
  std::sort(half_b.begin(), half_b.end());

  const std::size_t P = inst.points.rows();
  std::vector<AlignmentRow> out;
  for (std::size_t q : q_values) {
    ForestConfig c = config;
    c.candidates = q;
    c.validate(n / 2, inst.frame.cols());
    Matrix a(reps, P);
    Matrix b(reps, P);
    parallel_for(reps, threads, [&](std::size_t r) {
      const auto y = draw(inst.law, derive_key(seed, "align", "y", r));
      ForestConfig ca = c;
      ca.seed = derive_key(seed, "align", q, r, "A");
      set_row(a, r, means_at(inst, y, ca, 1, half_a));
      ForestConfig cb = c;
      cb.seed = derive_key(seed, "align", q, r, "B");
      set_row(b, r, means_at(inst, y, cb, 1, half_b));
    });
    AlignmentRow row;
    row.q = q;
    const auto est = stats::mean_covariance_jackknife(a, b);
    row.covariance = est.value;
    row.se = est.se;
    for (std::size_t i = 0; i < P; ++i) row.by_point.push_back(stats::covariance(a.col(i), b.col(i)));

    // Percentile bootstrap over replications.
    Rng boot(derive_key(seed, "align", "bootstrap", q));
    constexpr std::size_t kResamples = 2000;
    std::vector<double> stat(kResamples);
    std::vector<std::size_t> pick(reps);
    std::vector<double> ra(reps);
    std::vector<double> rb(reps);
    for (auto& s : stat) {
      for (auto& k : pick) k = boot.below(reps);
      double total = 0.0;
      for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t k = 0; k < reps; ++k) {
          ra[k] = a(pick[k], i);
          rb[k] = b(pick[k], i);
        }
        total += stats::covariance(ra, rb);
      }
      s = total / static_cast<double>(P);
    }
    const double tail = (1.0 - level) / 2.0;
    row.ci_low = stats::quantile(stat, tail);
    row.ci_high = stats::quantile(stat, 1.0 - tail);
    out.push_back(std::move(row));
  }
  return out;
}

CoverageResult coverage_study(const Scenario& scenario, const Instance& inst, FloorMode mode,
                              const std::vector<double>* oracle_ct) {
  scenario.validate();
  const std::size_t R = scenario.coverage_reps;
  const std::size_t P = inst.points.rows();
  const std::size_t B = scenario.forest.num_trees;
  if (B < 2) throw ConfigError("coverage study needs at least 2 deployed trees");
  const std::uint64_t seed = derive_key(scenario.seed, "coverage");
  const bool binary = scenario.kind == OutcomeKind::Binary;

  Matrix hits(R, P);
  std::vector<double> rep_coverage(R);
  std::vector<double> rep_width(R);
  for (std::size_t r = 0; r < R; ++r) {
    const auto y = draw(inst.law, derive_key(seed, "y", r));
    ForestConfig deploy = scenario.forest;
    deploy.seed = derive_key(seed, "forest", r);
    const Matrix per_tree =
        forest::tree_predictions(inst.frame, y, deploy, inst.points, scenario.threads);

    pasr::PasrConfig pc = scenario.pasr;
    pc.seed = derive_key(seed, "pasr", r);
    pc.threads = scenario.threads;
    std::vector<double> floor(P, 0.0);
    std::vector<double> sigma2(P, 0.0);
    if (!binary) {
      const auto nm = pasr::fit_nuisance_continuous(inst.frame, y, pc);
      sigma2 = nm.sigma2_at(inst.points);
      if (mode == FloorMode::Estimated) {
        floor = pasr::estimate_floor(inst.frame, nm, scenario.forest, inst.points, pc).floor;
      }
    } else if (mode == FloorMode::Estimated) {
      const auto nm = pasr::fit_nuisance_binary(inst.frame, y, scenario.forest, pc);
      floor = pasr::estimate_floor(inst.frame, nm, scenario.forest, inst.points, pc).floor;
    }

    Rng fresh(derive_key(seed, "new", r));
    std::normal_distribution<double> z(0.0, 1.0);
    double covered = 0.0;
    double width = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      const auto column = per_tree.col(i);
      const double mean = stats::mean(column);
      const double tree_var = stats::variance(column);
      if (binary) {
        const auto e = intervals::confidence_interval_binary(mean, tree_var, B, floor[i],
                                                             scenario.alpha);
        const double target = inst.point_law.location[i];
        hits(r, i) = (e.lower_clamped <= target && target <= e.upper_clamped) ? 1.0 : 0.0;
        width += e.width();
      } else {
        const auto e = intervals::prediction_interval_continuous(mean, sigma2[i], tree_var, B,
                                                                 floor[i], scenario.alpha);
        const double target = inst.point_law.location[i] + inst.point_law.scale[i] * z(fresh);
        hits(r, i) = (e.lower <= target && target <= e.upper) ? 1.0 : 0.0;
        width += e.width();
      }
      covered += hits(r, i);
    }
    rep_coverage[r] = covered / static_cast<double>(P);
    rep_width[r] = width / static_cast<double>(P);
  }

  CoverageResult out;
  out.reps = R;
  out.coverage = stats::mean(rep_coverage);
  out.se = R > 1 ? stats::standard_error(rep_coverage) : 0.0;
  out.mean_width = stats::mean(rep_width);
  for (std::size_t i = 0; i < P; ++i) out.by_point.push_back(stats::mean(hits.col(i)));
  if (oracle_ct != nullptr && oracle_ct->size() == P) {
    std::vector<std::size_t> order(P);
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return (*oracle_ct)[x] < (*oracle_ct)[y]; });
    std::vector<double> sum(10, 0.0);
    std::vector<double> count(10, 0.0);
    for (std::size_t rank = 0; rank < P; ++rank) {
      const std::size_t bin = rank * 10 / P;
      sum[bin] += out.by_point[order[rank]];
      count[bin] += 1.0;
    }
    for (std::size_t d = 0; d < 10; ++d) {
      out.by_decile.push_back(count[d] > 0.0 ? sum[d] / count[d] : std::nan(""));
    }
  }
  return out;
}

BiasResult bias_diagnostics(const Scenario& scenario, const Instance& inst,
                            const std::vector<double>& oracle_ct, std::size_t datasets,
                            bool true_law, std::uint64_t seed) {
  scenario.validate();
  if (datasets < 2) throw ConfigError("bias diagnostics need at least 2 datasets");
  const std::size_t P = inst.points.rows();
  if (oracle_ct.size() != P) throw DataError("oracle does not match the test points");
  BiasResult out;
  out.estimates = Matrix(datasets, P);
  for (std::size_t d = 0; d < datasets; ++d) {
    const auto y = draw(inst.law, derive_key(seed, "bias", "y", d));
    pasr::PasrConfig pc = scenario.pasr;
    pc.seed = derive_key(seed, "bias", "pasr", d);
    pc.threads = scenario.threads;
    pasr::NuisanceModel nm;
    if (true_law) {
      nm = pasr::from_law(inst.law, pc.epsilon);
    } else if (scenario.kind == OutcomeKind::Binary) {
      nm = pasr::fit_nuisance_binary(inst.frame, y, scenario.forest, pc);
    } else {
      nm = pasr::fit_nuisance_continuous(inst.frame, y, pc);
    }
    const auto est = pasr::estimate_floor(inst.frame, nm, scenario.forest, inst.points, pc);
    set_row(out.estimates, d, est.floor);
  }

  Matrix bias(datasets, P);
  std::vector<double> pooled;
  for (std::size_t d = 0; d < datasets; ++d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      bias(d, i) = out.estimates(d, i) - oracle_ct[i];
      pooled.push_back(bias(d, i));
      sum += bias(d, i);
    }
    out.dataset_mean_bias.push_back(sum / static_cast<double>(P));
  }
  out.mean = stats::mean(out.dataset_mean_bias);
  out.se = stats::standard_error(out.dataset_mean_bias);
  out.t_stat = out.se > 0.0 ? out.mean / out.se : 0.0;
  out.median = stats::quantile(pooled, 0.5);
  out.iqr = stats::quantile(pooled, 0.75) - stats::quantile(pooled, 0.25);
  if (P >= 2) {
    std::vector<double> point_mean(P);
    for (std::size_t i = 0; i < P; ++i) point_mean[i] = stats::mean(out.estimates.col(i));
    if (stats::variance(oracle_ct) > 0.0) out.regression = stats::fit_line(oracle_ct, point_mean);
    double corr = 0.0;
    std::size_t pairs = 0;
    for (std::size_t d = 0; d < datasets; ++d) {
      std::vector<double> bd(P);
      for (std::size_t i = 0; i < P; ++i) bd[i] = bias(d, i);
      for (std::size_t e = d + 1; e < datasets; ++e) {
        std::vector<double> be(P);
        for (std::size_t i = 0; i < P; ++i) be[i] = bias(e, i);
        corr += stats::correlation(bd, be);
        ++pairs;
      }
    }
    out.mean_pairwise_correlation = pairs > 0 ? corr / static_cast<double>(pairs) : 0.0;
  }
  return out;
}

bool ExperimentOutput::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<std::string> experiment_names() {
  return {"oracle", "variance-vs-b", "decomposition", "overlap", "alignment", "coverage", "bias"};
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

void add_point_rows(ExperimentOutput& out, const std::string& metric, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) out.rows.push_back({metric, i + 1, std::nullopt, v[i]});
}

void add_check(ExperimentOutput& out, std::string name, bool passed, std::string detail) {
  out.checks.push_back({std::move(name), passed, std::move(detail)});
}

std::vector<std::size_t> q_sweep(std::size_t p) {
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
  std::vector<std::size_t> q{1, root, p};
  q.erase(std::unique(q.begin(), q.end()), q.end());
  return q;
}

Json estimate_json(const stats::Estimate& e) { return Json{{"value", e.value}, {"se", e.se}}; }

std::vector<double> paired_values(const OracleResult& o) {
  std::vector<double> v;
  for (const auto& e : o.paired_form) v.push_back(e.value);
  return v;
}

}  // namespace

ExperimentOutput run_experiment(std::string_view name, const Scenario& scenario) {
  const auto names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + std::string(name) + "' (valid: " + list + ")");
  }
  scenario.validate();
  ExperimentOutput out;
  out.experiment = std::string(name);
  out.scenario = scenario;
  const std::uint64_t seed = scenario.seed;
  const std::size_t threads = scenario.threads;

  if (name == "overlap") {
    Json table = Json::array();
    for (std::size_t q : q_sweep(scenario.p)) {
      const auto r = candidate_overlap_sim(scenario.p, q, scenario.overlap_trials, seed);
      out.rows.push_back({"mean_overlap", std::nullopt, static_cast<double>(q), r.mean});
      out.rows.push_back({"mean_overlap_se", std::nullopt, static_cast<double>(q), r.se});
      out.rows.push_back({"expected_overlap", std::nullopt, static_cast<double>(q), r.expected});
      const bool ok = q == scenario.p ? (r.mean == r.expected && r.se == 0.0)
                                      : std::abs(r.mean - r.expected) <= 3.0 * r.se;
      add_check(out, "overlap q=" + std::to_string(q), ok,
                "mean " + fmt(r.mean) + " vs q^2/p " + fmt(r.expected) + " (se " + fmt(r.se) + ")");
      table.push_back({{"q", q}, {"mean", r.mean}, {"se", r.se}, {"expected", r.expected}});
    }
    out.summary["overlap"] = table;
  } else {
    const Instance inst = make_instance(scenario);
    if (name == "oracle") {
      const auto o = oracle_true_ct(inst, scenario.forest, scenario.oracle_reps,
                                    scenario.oracle_trees, seed, threads);
      std::vector<double> v1;
      std::vector<double> v1se;
      std::vector<double> v2se;
      for (std::size_t i = 0; i < o.variance_form.size(); ++i) {
        v1.push_back(o.variance_form[i].value);
        v1se.push_back(o.variance_form[i].se);
        v2se.push_back(o.paired_form[i].se);
      }
      add_point_rows(out, "ct_variance_form", v1);
      add_point_rows(out, "ct_variance_form_se", v1se);
      add_point_rows(out, "ct_paired", paired_values(o));
      add_point_rows(out, "ct_paired_se", v2se);
      out.summary["mean_ct_paired"] = estimate_json(o.paired_mean);
      out.summary["agreement"] = o.agreement;
      add_check(out, "methods agree within 3 SE at every point", o.agreement == 1.0,
                "agreement fraction " + fmt(o.agreement));
    } else if (name == "variance-vs-b") {
      const auto v = variance_vs_b(inst, scenario.forest, scenario.b_grid, scenario.oracle_reps,
                                   seed, threads);
      Json grid = Json::array();
      for (const auto& g : v.grid) {
        const auto key = static_cast<double>(g.trees);
        out.rows.push_back({"variance", std::nullopt, key, g.variance.value});
        out.rows.push_back({"variance_se", std::nullopt, key, g.variance.se});
        out.rows.push_back({"theory", std::nullopt, key, g.theory});
        out.rows.push_back({"fitted", std::nullopt, key, g.fitted});
        grid.push_back({{"B", g.trees}, {"variance", estimate_json(g.variance)}, {"theory", g.theory},
                        {"fitted", g.fitted}});
      }
      out.summary["grid"] = grid;
      out.summary["floor"] = estimate_json(v.floor);
      out.summary["tree_variance"] = estimate_json(v.tree_variance);
      out.summary["fit"] = {{"tree_variance", v.fit_tree_variance}, {"floor", v.fit_floor},
                            {"max_relative_residual", v.max_relative_residual}};
      const auto& last = v.grid.back();
      const double rel = std::abs(last.variance.value - v.floor.value) / v.floor.value;
      add_check(out, "large-B variance matches paired floor within 5%", rel <= 0.05,
                "relative error " + fmt(rel));
      const auto it = std::find_if(v.grid.begin(), v.grid.end(),
                                   [](const VarianceByB& g) { return g.trees == 1; });
      if (it != v.grid.end()) {
        const double se = std::hypot(it->variance.se, v.tree_variance.se);
        add_check(out, "B = 1 matches single-tree variance within 3 SE",
                  std::abs(it->variance.value - v.tree_variance.value) <= 3.0 * se,
                  fmt(it->variance.value) + " vs " + fmt(v.tree_variance.value) + " (se " + fmt(se) + ")");
      }
      add_check(out, "functional form residuals below 5%", v.max_relative_residual < 0.05,
                "max relative residual " + fmt(v.max_relative_residual));
    } else if (name == "decomposition") {
      const auto d = single_tree_variance_decomposition(inst, scenario.forest, scenario.inbag_reps,
                                                        scenario.inner_reps, seed);
      add_point_rows(out, "v_in", d.v_in_by_point);
      add_point_rows(out, "v_out", d.v_out_by_point);
      add_point_rows(out, "sigma_t2", d.total_by_point);
      out.summary["v_in"] = estimate_json(d.v_in);
      out.summary["v_out"] = estimate_json(d.v_out);
      out.summary["sum"] = estimate_json(d.sum);
      out.summary["sigma_t2"] = estimate_json(d.total);
      out.summary["pointwise_agreement"] = d.pointwise_agreement;
      const double se = std::hypot(d.sum.se, d.total.se);
      add_check(out, "v_in + v_out matches sigma_t2 within 3 SE",
                std::abs(d.sum.value - d.total.value) <= 3.0 * se,
                fmt(d.sum.value) + " vs " + fmt(d.total.value) + " (se " + fmt(se) + ")");
    } else if (name == "alignment") {
      ForestConfig c = scenario.forest;
      c.num_trees = scenario.alignment_trees;
      const auto rows = alignment_probe(inst, c, q_sweep(scenario.p), scenario.oracle_reps, seed,
                                        threads);
      Json table = Json::array();
      bool positive = true;
      bool monotone = true;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        const auto key = static_cast<double>(r.q);
        out.rows.push_back({"covariance", std::nullopt, key, r.covariance});
        out.rows.push_back({"covariance_se", std::nullopt, key, r.se});
        out.rows.push_back({"ci_low", std::nullopt, key, r.ci_low});
        out.rows.push_back({"ci_high", std::nullopt, key, r.ci_high});
        positive = positive && r.ci_low > 0.0;
        if (k > 0) {
          const auto& prev = rows[k - 1];
          monotone = monotone && r.covariance >= prev.covariance - 3.0 * std::hypot(r.se, prev.se);
        }
        table.push_back({{"q", r.q}, {"covariance", r.covariance}, {"se", r.se},
                         {"ci_low", r.ci_low}, {"ci_high", r.ci_high}});
      }
      out.summary["alignment"] = table;
      add_check(out, "cross-half covariance positive (99% lower bound above 0)", positive, "");
      add_check(out, "covariance nondecreasing in q up to MC error", monotone, "");
    } else if (name == "coverage") {
      const auto o = oracle_true_ct(inst, scenario.forest, scenario.oracle_reps,
                                    scenario.oracle_trees, seed, threads);
      const auto oracle = paired_values(o);
      const auto c = coverage_study(scenario, inst, FloorMode::Estimated, &oracle);
      add_point_rows(out, "coverage", c.by_point);
      for (std::size_t d = 0; d < c.by_decile.size(); ++d) {
        out.rows.push_back({"coverage_decile", std::nullopt, static_cast<double>(d + 1), c.by_decile[d]});
      }
      out.summary["coverage"] = {{"value", c.coverage}, {"se", c.se}, {"mean_width", c.mean_width},
                                 {"deciles", c.by_decile}};
      add_check(out, "marginal coverage in [0.92, 0.98]", c.coverage >= 0.92 && c.coverage <= 0.98,
                "coverage " + fmt(c.coverage));
    } else if (name == "bias") {
      const auto o = oracle_true_ct(inst, scenario.forest, scenario.oracle_reps,
                                    scenario.oracle_trees, seed, threads);
      const auto oracle = paired_values(o);
      const auto b = bias_diagnostics(scenario, inst, oracle, scenario.datasets, false,
                                      derive_key(seed, "bias-run"));
      add_point_rows(out, "oracle_ct", oracle);
      std::vector<double> point_mean(oracle.size());
      for (std::size_t i = 0; i < oracle.size(); ++i) point_mean[i] = stats::mean(b.estimates.col(i));
      add_point_rows(out, "ct_hat_mean", point_mean);
      for (std::size_t d = 0; d < b.dataset_mean_bias.size(); ++d) {
        out.rows.push_back({"dataset_mean_bias", std::nullopt, static_cast<double>(d + 1),
                            b.dataset_mean_bias[d]});
      }
      const double se = std::hypot(b.se, o.paired_mean.se);
      out.summary["bias"] = {{"mean", b.mean},          {"se", se},
                             {"median", b.median},      {"iqr", b.iqr},
                             {"slope", b.regression.slope},
                             {"intercept", b.regression.intercept},
                             {"mean_pairwise_correlation", b.mean_pairwise_correlation}};
      if (scenario.kind == OutcomeKind::Continuous) {
        add_check(out, "mean bias not significantly negative (one-sided 1%)",
                  b.mean / se >= -2.326, "mean " + fmt(b.mean) + " (se " + fmt(se) + ")");
      } else {
        add_check(out, "|mean bias| <= 0.01", std::abs(b.mean) <= 0.01, "mean " + fmt(b.mean));
      }
    }
  }

  Json checks = Json::array();
  for (const auto& c : out.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  out.summary["experiment"] = out.experiment;
  out.summary["scenario"] = scenario;
  out.summary["checks"] = checks;
  out.summary["passed"] = out.passed();
  return out;
}

std::string tidy_csv(const ExperimentOutput& output,
                     const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::ostringstream s;
  s << csv::metadata_block(metadata);
  s << "experiment,scenario,n,p,kind,q,sampling,min_leaf,metric,point,key,value\n";
  const auto& sc = output.scenario;
  const std::string prefix = output.experiment + ',' + sc.name + ',' + std::to_string(sc.n) + ',' +
                             std::to_string(sc.p) + ',' + std::string(to_string(sc.kind)) + ',' +
                             std::to_string(sc.forest.resolved_candidates(sc.p)) + ',' +
                             forest::to_string(sc.forest.sampling) + ',' +
                             std::to_string(sc.forest.min_leaf) + ',';
  for (const auto& row : output.rows) {
    s << prefix << row.metric << ',';
    if (row.point) s << *row.point;
    s << ',';
    if (row.key) s << csv::format_double(*row.key);
    s << ',' << csv::format_double(row.value) << '\n';
  }
  return s.str();
}

}  // namespace rfcov::experiments
