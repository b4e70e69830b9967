#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rfcov/dgm.hpp"
#include "rfcov/forest.hpp"
#include "rfcov/json_io.hpp"
#include "rfcov/pasr.hpp"
#include "rfcov/stats.hpp"

namespace rfcov::experiments {

/// One simulation scenario and every Monte Carlo budget the experiments use.
struct Scenario {
  std::string name = "favorable";
  std::size_t n = 400;
  std::size_t p = 10;
  OutcomeKind kind = OutcomeKind::Continuous;
  /// Deployed forest; num_trees is B_deploy.
  forest::ForestConfig forest;
  pasr::PasrConfig pasr;

  std::size_t n_test = 100;
  double jitter_sd = 0.02;
  double alpha = 0.05;

  std::size_t oracle_reps = 120;   // R_true
  std::size_t oracle_trees = 1500; // B_true
  std::size_t coverage_reps = 50;  // R_cov
  std::size_t datasets = 10;       // S
  std::vector<std::size_t> b_grid{1, 2, 5, 10, 25, 50, 100, 250, 500, 1000, 1500};
  std::size_t inbag_reps = 40;     // K_inbag
  std::size_t inner_reps = 60;     // M_inner
  std::size_t overlap_trials = 100000;
  std::size_t alignment_trees = 250;

  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

/// Presets: favorable, challenging, stress. Throws ConfigError otherwise.
Scenario preset(std::string_view name, OutcomeKind kind = OutcomeKind::Continuous);
std::vector<std::string> preset_names();

void to_json(Json& j, const Scenario& s);
/// Overlays the keys present in j onto s.
void from_json(const Json& j, Scenario& s);

/// Fixed design, outcome model and test points of a scenario.
struct Instance {
  dgm::Design design;
  dgm::OutcomeModelSpec model;
  forest::TrainingFrame frame;
  /// Full-design test rows.
  Matrix points;
  /// Truth at the training rows.
  OutcomeLaw law;
  /// Truth at the test points.
  OutcomeLaw point_law;
};

Instance make_instance(const Scenario& scenario);
/// Same design with a different number of test points.
Instance make_instance(const Scenario& scenario, std::size_t n_test);

struct OracleResult {
  /// Common tree seeds across replications; variance across replications.
  std::vector<stats::Estimate> variance_form;
  /// Independently seeded pair per replication; covariance across replications.
  std::vector<stats::Estimate> paired_form;
  /// Paired form averaged over points, SE from deleting whole replications.
  stats::Estimate paired_mean;
  /// Fraction of points where the two forms agree within 3 combined SE.
  double agreement = 0.0;
};

OracleResult oracle_true_ct(const Instance& inst, const forest::ForestConfig& config,
                            std::size_t reps, std::size_t trees, std::uint64_t seed,
                            std::size_t threads = 1);

struct VarianceByB {
  std::size_t trees = 0;
  /// Var(f_B(x)) across joint (Y, theta) draws, averaged over points.
  stats::Estimate variance;
  /// sigma_T^2 / B + (B - 1) / B * C_T from the direct estimates.
  double theory = 0.0;
  /// Value of the least-squares fit at this B.
  double fitted = 0.0;
};

struct VarianceVsBResult {
  std::vector<VarianceByB> grid;
  /// Paired-forest floor at the largest B, averaged over points.
  stats::Estimate floor;
  /// Independent single-tree variance, averaged over points.
  stats::Estimate tree_variance;
  /// Fit of the grid to tree_var / B + floor * (B - 1) / B.
  double fit_tree_variance = 0.0;
  double fit_floor = 0.0;
  double max_relative_residual = 0.0;
};

VarianceVsBResult variance_vs_b(const Instance& inst, const forest::ForestConfig& config,
                                const std::vector<std::size_t>& b_grid, std::size_t reps,
                                std::uint64_t seed, std::size_t threads = 1);

struct Decomposition {
  /// Point-averaged components with jackknife SEs.
  stats::Estimate v_in;
  stats::Estimate v_out;
  stats::Estimate sum;
  stats::Estimate total;
  /// Share of points where v_in + v_out matches total within 3 combined SE.
  double pointwise_agreement = 0.0;
  std::vector<double> v_in_by_point;
  std::vector<double> v_out_by_point;
  std::vector<double> total_by_point;
};

/// V_out uses the unbiased between-realization component
/// var_k(mean_m) - V_in / M.
Decomposition single_tree_variance_decomposition(const Instance& inst,
                                                 const forest::ForestConfig& config,
                                                 std::size_t inbag_reps, std::size_t inner_reps,
                                                 std::uint64_t seed);

struct OverlapResult {
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t trials = 0;
  double mean = 0.0;
  double se = 0.0;
  double expected = 0.0;
};

OverlapResult candidate_overlap_sim(std::size_t p, std::size_t q, std::size_t trials,
                                    std::uint64_t seed);

struct AlignmentRow {
  std::size_t q = 0;
  /// Cross-half covariance averaged over points.
  double covariance = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> by_point;
};

/// Disjoint half-split probe; `level` is the bootstrap CI level.
std::vector<AlignmentRow> alignment_probe(const Instance& inst, const forest::ForestConfig& config,
                                          const std::vector<std::size_t>& q_values,
                                          std::size_t reps, std::uint64_t seed,
                                          std::size_t threads = 1, double level = 0.99);

enum class FloorMode { Estimated, Zero };

struct CoverageResult {
  double coverage = 0.0;
  double se = 0.0;
  std::size_t reps = 0;
  std::vector<double> by_point;
  /// Mean interval width per replication.
  double mean_width = 0.0;
  /// Decile bins of oracle C_T (when an oracle was supplied).
  std::vector<double> by_decile;
};

CoverageResult coverage_study(const Scenario& scenario, const Instance& inst,
                              FloorMode mode = FloorMode::Estimated,
                              const std::vector<double>* oracle_ct = nullptr);

struct BiasResult {
  std::vector<double> dataset_mean_bias;
  double mean = 0.0;
  double se = 0.0;
  double median = 0.0;
  double iqr = 0.0;
  /// One-sided t statistic of the mean bias.
  double t_stat = 0.0;
  stats::LineFit regression;
  double mean_pairwise_correlation = 0.0;
  /// Rows: datasets, columns: points.
  Matrix estimates;
};

/// PASR on `datasets` independent outcome draws at the fixed design, scored
/// against `oracle_ct`. With `true_law` the nuisance is the generating law.
BiasResult bias_diagnostics(const Scenario& scenario, const Instance& inst,
                            const std::vector<double>& oracle_ct, std::size_t datasets,
                            bool true_law, std::uint64_t seed);

/// Tidy output of a named experiment.
struct TidyRow {
  std::string metric;
  std::optional<std::size_t> point;
  std::optional<double> key;
  double value = 0.0;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentOutput {
  std::string experiment;
  Scenario scenario;
  std::vector<TidyRow> rows;
  std::vector<Check> checks;
  Json summary;

  bool passed() const;
};

std::vector<std::string> experiment_names();
/// Runs oracle, variance-vs-b, decomposition, overlap, alignment, coverage or
/// bias. Throws ConfigError for any other name.
ExperimentOutput run_experiment(std::string_view name, const Scenario& scenario);

/// Tidy CSV with `# key: value` metadata lines.
std::string tidy_csv(const ExperimentOutput& output,
                     const std::vector<std::pair<std::string, std::string>>& metadata);

}  // namespace rfcov::experiments
