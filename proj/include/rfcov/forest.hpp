#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfcov/matrix.hpp"
#include "rfcov/outcome.hpp"
#include "rfcov/rng.hpp"

namespace rfcov::forest {

enum class Sampling { Bootstrap, Subsample };

std::string to_string(Sampling sampling);
Sampling parse_sampling(std::string_view text);

struct ForestConfig {
  std::size_t num_trees = 500;
  /// Candidate features per node (q). 0 means floor(sqrt(p)), at least 1.
  std::size_t candidates = 0;
  Sampling sampling = Sampling::Bootstrap;
  /// Subsample fraction; ignored for bootstrap.
  double sample_fraction = 1.0;
  /// Minimum inbag multiplicity per leaf (s).
  std::size_t min_leaf = 5;
  std::optional<std::size_t> max_depth;
  std::uint64_t seed = 0;

  std::size_t resolved_candidates(std::size_t p) const noexcept;
  /// Inbag draws per tree: n for bootstrap, round(fraction * n) for subsampling.
  std::size_t sample_size(std::size_t n) const noexcept;
  /// Throws ConfigError when the config cannot be used for n rows and p features.
  void validate(std::size_t n, std::size_t p) const;
};

struct InbagVector {
  std::vector<std::uint32_t> counts;

  std::size_t size() const noexcept { return counts.size(); }
  std::size_t total() const noexcept;
};

/// Draws inbag multiplicities over n rows. When `eligible` is non-empty only
/// those rows can be drawn and the sample size is based on eligible.size().
InbagVector draw_inbag(const ForestConfig& config, std::size_t n, Rng& rng,
                       std::span<const std::uint32_t> eligible = {});

/// Internal nodes have feature >= 0 and route x[feature] <= threshold left.
/// Leaves have feature == -1 and `left` holds the leaf index.
struct Node {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<double> leaf_values;
  /// CSR leaf membership: rows of leaf k are member_rows[member_offsets[k] ..
  /// member_offsets[k + 1]). Empty when the tree was grown without members.
  std::vector<std::uint32_t> member_offsets;
  std::vector<std::uint32_t> member_rows;
  std::vector<std::uint32_t> member_counts;
  InbagVector inbag;
  std::uint64_t seed = 0;

  std::size_t leaf_count() const noexcept { return leaf_values.size(); }
  bool has_members() const noexcept { return !member_offsets.empty(); }
  std::size_t leaf_of(std::span<const double> x) const noexcept;
  /// Same as leaf_of for a row-major point array with stride `p`.
  std::size_t leaf_of(const double* x) const noexcept;
  double predict(std::span<const double> x) const noexcept {
    return leaf_values[leaf_of(x)];
  }
  std::span<const std::uint32_t> leaf_rows(std::size_t leaf) const noexcept;
  std::span<const std::uint32_t> leaf_counts(std::size_t leaf) const noexcept;
  /// Longest root-to-leaf path, in edges.
  std::size_t depth() const;
  /// Recomputes leaf values from members for a new outcome vector while
  /// keeping the partition frozen.
  void refit(std::span<const double> y);
};

/// Training covariates with each column presorted once. Sorting ties are
/// broken by row index.
class TrainingFrame {
 public:
  explicit TrainingFrame(Matrix x);

  const Matrix& x() const noexcept { return x_; }
  std::size_t rows() const noexcept { return x_.rows(); }
  std::size_t cols() const noexcept { return x_.cols(); }
  std::span<const std::uint32_t> order(std::size_t j) const noexcept {
    return {order_.data() + j * x_.rows(), x_.rows()};
  }

 private:
  Matrix x_;
  std::vector<std::uint32_t> order_;
};

/// Reusable scratch for growing many trees on one frame. Not thread-safe;
/// use one per worker.
class TreeGrower {
 public:
  explicit TreeGrower(const TrainingFrame& frame);

  Tree grow(std::span<const double> y, InbagVector inbag, const ForestConfig& config, Rng& rng,
            bool keep_members = true);

 private:
  struct Pending {
    std::uint32_t node;
    std::uint32_t begin;
    std::uint32_t end;
    std::uint32_t depth;
  };
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double decrease = 0.0;
  };

  Split best_split(std::uint32_t begin, std::uint32_t end, std::size_t m, double w_total,
                   double wy_total, std::size_t min_leaf, std::size_t q, Rng& rng);
  void partition(std::uint32_t begin, std::uint32_t end, std::size_t m, const Split& split);

  const TrainingFrame& frame_;
  std::vector<std::uint32_t> lists_;
  std::vector<std::uint32_t> scratch_;
  std::vector<double> weight_;
  std::vector<double> weighted_y_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> features_;
  std::vector<std::uint32_t> chosen_;
  std::vector<Pending> stack_;
};

/// Per-tree normalized leaf weights over n training rows.
std::vector<double> tree_weights(const Tree& tree, std::span<const double> x, std::size_t n);

struct Forest {
  ForestConfig config;
  OutcomeKind kind = OutcomeKind::Continuous;
  std::size_t num_features = 0;
  std::size_t num_train = 0;
  std::vector<Tree> trees;

  std::size_t size() const noexcept { return trees.size(); }
};

/// Key of tree b's random stream.
std::uint64_t tree_key(std::uint64_t seed, std::size_t b) noexcept;

/// Grows config.num_trees trees. With a non-empty `eligible` list only those
/// rows are ever drawn. Output does not depend on `threads`.
Forest fit_forest(const TrainingFrame& frame, std::span<const double> y, const ForestConfig& config,
                  OutcomeKind kind = OutcomeKind::Continuous, std::size_t threads = 1,
                  std::span<const std::uint32_t> eligible = {});

struct ForestPrediction {
  double mean = 0.0;
  std::vector<double> per_tree;
  /// Sample variance of per-tree predictions (divisor B-1); absent when B = 1.
  std::optional<double> tree_variance;
};

ForestPrediction predict_forest(const Forest& forest, std::span<const double> x);
std::vector<ForestPrediction> predict_forest(const Forest& forest, const Matrix& points,
                                             std::size_t threads = 1);
std::vector<double> forest_weights(const Forest& forest, std::span<const double> x);

/// Out-of-bag mean per training row; absent when a row is inbag in every tree.
std::vector<std::optional<double>> predict_oob(const Forest& forest, const Matrix& x);

/// Grows config.num_trees trees and returns their predictions at each point
/// (B x points.rows()) without keeping the trees.
Matrix tree_predictions(const TrainingFrame& frame, std::span<const double> y,
                        const ForestConfig& config, const Matrix& points, std::size_t threads = 1,
                        std::span<const std::uint32_t> eligible = {});

/// Column means of tree_predictions.
std::vector<double> forest_means(const Matrix& per_tree);

/// Versioned JSON artifact.
std::string to_json(const Forest& forest);
Forest from_json(std::string_view text);
void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);

}  // namespace rfcov::forest
