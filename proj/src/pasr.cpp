#include "rfcov/pasr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rfcov/error.hpp"
#include "rfcov/parallel.hpp"
#include "rfcov/stats.hpp"

namespace rfcov::pasr {

using forest::ForestConfig;
using forest::TrainingFrame;

void PasrConfig::validate() const {
  if (replicates < 2) throw ConfigError("replicates (R_syn) must be at least 2");
  if (mc_trees < 1) throw ConfigError("mc_trees (B_mc) must be at least 1");
  if (crossfit_reps < 1) throw ConfigError("crossfit_reps (R_cf) must be at least 1");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (variance_trees < 1) throw ConfigError("variance_trees must be at least 1");
  if (variance_min_leaf < 1) throw ConfigError("variance_min_leaf must be at least 1");
}

ForestConfig PasrConfig::variance_forest_config(std::uint64_t key) const {
  ForestConfig c;
  c.num_trees = variance_trees;
  c.candidates = variance_candidates;
  c.sampling = forest::Sampling::Bootstrap;
  c.min_leaf = variance_min_leaf;
  c.seed = key;
  return c;
}

OutcomeLaw NuisanceModel::law() const {
  OutcomeLaw out;
  out.kind = kind;
  out.location = location;
  out.scale = scale;
  if (kind == OutcomeKind::Binary) out.scale.assign(location.size(), 0.0);
  return out;
}

std::vector<double> NuisanceModel::sigma2_at(const Matrix& points) const {
  if (!variance_forest) throw DataError("nuisance model has no variance forest");
  std::vector<double> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double v = forest::predict_forest(*variance_forest, points.row(i)).mean;
    out[i] = std::max(v, epsilon);
  }
  return out;
}

namespace {

// Saturated single-tree mean fit on `train`, evaluated at the rows `target`.
void half_fit(const TrainingFrame& frame, std::span<const double> y,
              std::span<const std::uint32_t> train, std::span<const std::uint32_t> target,
              std::vector<double>& out) {
  ForestConfig c;
  c.num_trees = 1;
  c.candidates = frame.cols();
  c.sampling = forest::Sampling::Subsample;
  c.sample_fraction = 1.0;
  c.min_leaf = 1;
  Rng rng(0);
  const auto inbag = forest::draw_inbag(c, frame.rows(), rng, train);
  forest::TreeGrower grower(frame);
  const auto tree = grower.grow(y, inbag, c, rng, false);
  for (auto r : target) out[r] = tree.predict(frame.x().row(r));
}

}  // namespace

NuisanceModel fit_nuisance_continuous(const TrainingFrame& frame, std::span<const double> y,
                                      const PasrConfig& config) {
  config.validate();
  const std::size_t n = frame.rows();
  if (n < 4) throw DataError("continuous nuisance fit needs at least 4 rows");
  if (y.size() != n) throw DataError("outcome length does not match the training rows");

  std::vector<std::vector<double>> seq(2, std::vector<double>(n, 0.0));
  parallel_for(2, config.threads, [&](std::size_t k) {
    std::vector<std::uint32_t> index(n);
    std::vector<double> base(n), pred(n);
    for (std::size_t rep = 0; rep < config.crossfit_reps; ++rep) {
      std::iota(index.begin(), index.end(), 0U);
      Rng rng(derive_key(config.seed, "nuisance", k + 1, rep));
      std::shuffle(index.begin(), index.end(), rng);
      const std::span<const std::uint32_t> all(index);
      auto first = all.first(n / 2);
      auto second = all.subspan(n / 2);
      std::vector<std::uint32_t> a(first.begin(), first.end());
      std::vector<std::uint32_t> b(second.begin(), second.end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      auto& dest = rep == 0 ? base : pred;
      half_fit(frame, y, a, b, dest);
      half_fit(frame, y, b, a, dest);
      if (rep > 0)
        for (std::size_t i = 0; i < n; ++i) seq[k][i] += pred[i] - base[i];
    }
    // Averaged as offsets from the first repetition so equal predictions stay exact.
    for (std::size_t i = 0; i < n; ++i)
      seq[k][i] = base[i] + seq[k][i] / static_cast<double>(config.crossfit_reps);
  });

  NuisanceModel model;
  model.kind = OutcomeKind::Continuous;
  model.epsilon = config.epsilon;
  model.mean_seq1 = std::move(seq[0]);
  model.mean_seq2 = std::move(seq[1]);
  model.location.resize(n);
  model.residual_product.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    model.location[i] = 0.5 * (model.mean_seq1[i] + model.mean_seq2[i]);
    model.residual_product[i] = (y[i] - model.mean_seq1[i]) * (y[i] - model.mean_seq2[i]);
  }
  model.variance_forest = forest::fit_forest(
      frame, model.residual_product,
      config.variance_forest_config(derive_key(config.seed, "variance")),
      OutcomeKind::Continuous, config.threads);
  model.scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = forest::predict_forest(*model.variance_forest, frame.x().row(i)).mean;
    model.scale[i] = std::sqrt(std::max(v, config.epsilon));
  }
  return model;
}

NuisanceModel fit_nuisance_binary(const TrainingFrame& frame, std::span<const double> y,
                                  const ForestConfig& target, const PasrConfig& config) {
  config.validate();
  const std::size_t n = frame.rows();
  if (y.size() != n) throw DataError("outcome length does not match the training rows");
  ForestConfig c = target;
  c.seed = derive_key(config.seed, "nuisance", "binary");
  const auto f = forest::fit_forest(frame, y, c, OutcomeKind::Binary, config.threads);
  const auto oob = forest::predict_oob(f, frame.x());

  NuisanceModel model;
  model.kind = OutcomeKind::Binary;
  model.epsilon = config.epsilon;
  model.location.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (oob[i]) {
      model.location[i] = *oob[i];
    } else {
      model.location[i] = forest::predict_forest(f, frame.x().row(i)).mean;
      ++model.oob_fallbacks;
    }
  }
  return model;
}

NuisanceModel from_law(const OutcomeLaw& law, double epsilon) {
  NuisanceModel model;
  model.kind = law.kind;
  model.epsilon = epsilon;
  model.location = law.location;
  if (law.kind == OutcomeKind::Continuous) model.scale = law.scale;
  return model;
}

std::vector<double> gen_synthetic(const NuisanceModel& nuisance, std::uint64_t seed) {
  Rng rng(derive_key(seed, "synthetic"));
  return draw_outcomes(nuisance.law(), rng);
}

FloorEstimate estimate_floor(const TrainingFrame& frame, const NuisanceModel& nuisance,
                             const ForestConfig& target, const Matrix& points,
                             const PasrConfig& config) {
  config.validate();
  if (points.rows() == 0) throw DataError("no test points");
  if (nuisance.location.size() != frame.rows()) {
    throw DataError("nuisance model does not match the training rows");
  }
  const std::size_t R = config.replicates;
  const std::size_t P = points.rows();
  const OutcomeLaw law = nuisance.law();
  Matrix a(R, P);
  Matrix b(R, P);
  parallel_for(R, config.threads, [&](std::size_t r) {
    Rng rng(derive_key(config.seed, "synthetic", r));
    const auto y = draw_outcomes(law, rng);
    ForestConfig ca = target;
    ca.num_trees = config.mc_trees;
    ca.seed = derive_key(config.seed, "replicate", r, "A");
    ForestConfig cb = ca;
    cb.seed = derive_key(config.seed, "replicate", r, "B");
    const auto ma = forest::forest_means(forest::tree_predictions(frame, y, ca, points));
    const auto mb = forest::forest_means(forest::tree_predictions(frame, y, cb, points));
    for (std::size_t i = 0; i < P; ++i) {
      a(r, i) = ma[i];
      b(r, i) = mb[i];
    }
  });

  FloorEstimate out;
  out.replicates = R;
  out.mc_trees = config.mc_trees;
  out.floor.resize(P);
  out.floor_clamped.resize(P);
  for (std::size_t i = 0; i < P; ++i) {
    out.floor[i] = stats::covariance(a.col(i), b.col(i));
    out.floor_clamped[i] = std::max(out.floor[i], 0.0);
  }
  if (config.keep_series) {
    out.series_a = std::move(a);
    out.series_b = std::move(b);
  }
  return out;
}

}  // namespace rfcov::pasr
