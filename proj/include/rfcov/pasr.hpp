#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rfcov/forest.hpp"
#include "rfcov/matrix.hpp"
#include "rfcov/outcome.hpp"

namespace rfcov::pasr {

struct PasrConfig {
  /// Synthetic replicates (R_syn).
  std::size_t replicates = 60;
  /// Trees in each of the paired forests (B_mc).
  std::size_t mc_trees = 250;
  /// Cross-fit repetitions per sequence (R_cf).
  std::size_t crossfit_reps = 5;
  double epsilon = 1e-6;
  /// Variance forest grown on the residual products.
  std::size_t variance_trees = 200;
  std::size_t variance_min_leaf = 5;
  /// 0 means floor(sqrt(p)).
  std::size_t variance_candidates = 0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Keep the A/B replicate series in the estimate.
  bool keep_series = false;

  void validate() const;
  forest::ForestConfig variance_forest_config(std::uint64_t key) const;
};

/// Fitted conditional law of Y given X at the training rows.
struct NuisanceModel {
  OutcomeKind kind = OutcomeKind::Continuous;
  /// m(X_i) for continuous outcomes, p(X_i) for binary ones.
  std::vector<double> location;
  /// sigma(X_i); empty for binary outcomes.
  std::vector<double> scale;
  double epsilon = 1e-6;

  // Continuous diagnostics.
  std::vector<double> mean_seq1;
  std::vector<double> mean_seq2;
  std::vector<double> residual_product;
  std::optional<forest::Forest> variance_forest;

  /// Binary rows that were inbag in every tree and fell back to the full forest.
  std::size_t oob_fallbacks = 0;

  OutcomeLaw law() const;
  /// sigma^2(x) = max(variance forest prediction, epsilon) per point row.
  std::vector<double> sigma2_at(const Matrix& points) const;
};

/// Cross-fitted mean and residual-product variance forest. Requires n >= 4.
NuisanceModel fit_nuisance_continuous(const forest::TrainingFrame& frame, std::span<const double> y,
                                      const PasrConfig& config);

/// OOB probabilities from a forest with the deployed configuration.
NuisanceModel fit_nuisance_binary(const forest::TrainingFrame& frame, std::span<const double> y,
                                  const forest::ForestConfig& target, const PasrConfig& config);

/// Wraps a known law (e.g. the data-generating truth) as a nuisance model.
NuisanceModel from_law(const OutcomeLaw& law, double epsilon = 1e-6);

/// One synthetic outcome vector from the fitted law.
std::vector<double> gen_synthetic(const NuisanceModel& nuisance, std::uint64_t seed);

struct FloorEstimate {
  std::vector<double> floor;
  std::vector<double> floor_clamped;
  std::size_t replicates = 0;
  std::size_t mc_trees = 0;
  /// R_syn x points matrices of forest A and B predictions (when kept).
  Matrix series_a;
  Matrix series_b;
};

/// Paired-forest covariance floor at each point row.
FloorEstimate estimate_floor(const forest::TrainingFrame& frame, const NuisanceModel& nuisance,
                             const forest::ForestConfig& target, const Matrix& points,
                             const PasrConfig& config);

}  // namespace rfcov::pasr
