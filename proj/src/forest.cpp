#include "rfcov/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rfcov/error.hpp"
#include "rfcov/parallel.hpp"

namespace rfcov::forest {

std::string to_string(Sampling sampling) {
  return sampling == Sampling::Bootstrap ? "bootstrap" : "subsample";
}

Sampling parse_sampling(std::string_view text) {
  if (text == "bootstrap") return Sampling::Bootstrap;
  if (text == "subsample") return Sampling::Subsample;
  throw ConfigError("unknown sampling scheme '" + std::string(text) +
                    "' (expected bootstrap or subsample)");
}

std::size_t ForestConfig::resolved_candidates(std::size_t p) const noexcept {
  if (candidates != 0) return candidates;
  const auto root = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))));
  return std::max<std::size_t>(root, 1);
}

std::size_t ForestConfig::sample_size(std::size_t n) const noexcept {
  if (sampling == Sampling::Bootstrap) return n;
  return static_cast<std::size_t>(std::llround(sample_fraction * static_cast<double>(n)));
}

void ForestConfig::validate(std::size_t n, std::size_t p) const {
  if (num_trees == 0) throw ConfigError("num_trees must be at least 1");
  if (p == 0) throw ConfigError("at least one feature is required");
  if (n == 0) throw ConfigError("at least one training row is required");
  if (candidates > p) {
    throw ConfigError("candidates (q = " + std::to_string(candidates) +
                      ") exceeds the number of features (p = " + std::to_string(p) + ")");
  }
  if (min_leaf == 0) throw ConfigError("min_leaf must be at least 1");
  if (sampling == Sampling::Subsample) {
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
      throw ConfigError("sample_fraction must lie in (0, 1]");
    }
    const std::size_t size = sample_size(n);
    if (size == 0) throw ConfigError("subsample size rounds to 0");
    if (sample_fraction * static_cast<double>(n) < 2.0 * static_cast<double>(min_leaf)) {
      throw ConfigError("sample_fraction * n must be at least 2 * min_leaf");
    }
  }
}

std::size_t InbagVector::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

InbagVector draw_inbag(const ForestConfig& config, std::size_t n, Rng& rng,
                       std::span<const std::uint32_t> eligible) {
  if (n == 0) throw ConfigError("cannot draw an inbag sample from 0 rows");
  const std::size_t pool = eligible.empty() ? n : eligible.size();
  auto at = [&](std::size_t k) -> std::size_t { return eligible.empty() ? k : eligible[k]; };
  InbagVector inbag;
  inbag.counts.assign(n, 0);
  if (config.sampling == Sampling::Bootstrap) {
    for (std::size_t k = 0; k < pool; ++k) ++inbag.counts[at(rng.below(pool))];
    return inbag;
  }
  const std::size_t size = config.sample_size(pool);
  if (size == 0) throw ConfigError("subsample size rounds to 0");
  std::vector<std::uint32_t> index(pool);
  std::iota(index.begin(), index.end(), 0U);
  for (std::size_t k = 0; k < size; ++k) {
    const std::size_t pick = k + rng.below(pool - k);
    std::swap(index[k], index[pick]);
    inbag.counts[at(index[k])] = 1;
  }
  return inbag;
}

std::size_t Tree::leaf_of(const double* x) const noexcept {
  std::size_t k = 0;
  while (!nodes[k].is_leaf()) {
    const Node& node = nodes[k];
    k = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[k].left;
}

std::size_t Tree::leaf_of(std::span<const double> x) const noexcept { return leaf_of(x.data()); }

std::span<const std::uint32_t> Tree::leaf_rows(std::size_t leaf) const noexcept {
  if (!has_members()) return {};
  return {member_rows.data() + member_offsets[leaf],
          member_offsets[leaf + 1] - member_offsets[leaf]};
}

std::span<const std::uint32_t> Tree::leaf_counts(std::size_t leaf) const noexcept {
  if (!has_members()) return {};
  return {member_counts.data() + member_offsets[leaf],
          member_offsets[leaf + 1] - member_offsets[leaf]};
}

std::size_t Tree::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [k, d] = stack.back();
    stack.pop_back();
    if (nodes[k].is_leaf()) {
      deepest = std::max(deepest, d);
    } else {
      stack.emplace_back(nodes[k].left, d + 1);
      stack.emplace_back(nodes[k].right, d + 1);
    }
  }
  return deepest;
}

void Tree::refit(std::span<const double> y) {
  if (!has_members()) throw DataError("tree was grown without leaf members");
  for (std::size_t leaf = 0; leaf < leaf_count(); ++leaf) {
    const auto rows = leaf_rows(leaf);
    const auto counts = leaf_counts(leaf);
    if (rows.empty()) {
      leaf_values[leaf] = 0.0;
      continue;
    }
    // Offsets from the first member keep a constant leaf exact.
    const double base = y[rows[0]];
    double w = 0.0;
    double wd = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      w += counts[k];
      wd += counts[k] * (y[rows[k]] - base);
    }
    leaf_values[leaf] = w > 0.0 ? base + wd / w : 0.0;
  }
}

TrainingFrame::TrainingFrame(Matrix x) : x_(std::move(x)) {
  const std::size_t n = x_.rows();
  if (n > std::numeric_limits<std::uint32_t>::max()) throw DataError("too many training rows");
  order_.resize(n * x_.cols());
  for (std::size_t j = 0; j < x_.cols(); ++j) {
    auto first = order_.begin() + static_cast<std::ptrdiff_t>(j * n);
    std::iota(first, first + static_cast<std::ptrdiff_t>(n), 0U);
    const auto column = x_.col(j);
    for (double v : column) {
      if (!std::isfinite(v)) throw DataError("non-finite covariate in column x" + std::to_string(j + 1));
    }
    std::stable_sort(first, first + static_cast<std::ptrdiff_t>(n),
                     [&](std::uint32_t a, std::uint32_t b) { return column[a] < column[b]; });
  }
}

TreeGrower::TreeGrower(const TrainingFrame& frame) : frame_(frame) {
  features_.resize(frame.cols());
  std::iota(features_.begin(), features_.end(), 0U);
  weight_.resize(frame.rows());
  weighted_y_.resize(frame.rows());
  goes_left_.resize(frame.rows());
}

TreeGrower::Split TreeGrower::best_split(std::uint32_t begin, std::uint32_t end, std::size_t m,
                                         double w_total, double wy_total, std::size_t min_leaf,
                                         std::size_t q, Rng& rng) {
  const std::size_t p = features_.size();
  for (std::size_t t = 0; t < q; ++t) {
    const std::size_t pick = t + rng.below(p - t);
    std::swap(features_[t], features_[pick]);
  }
  chosen_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(q));
  std::sort(chosen_.begin(), chosen_.end());

  const double s = static_cast<double>(min_leaf);
  Split best;
  for (std::uint32_t j : chosen_) {
    const std::uint32_t* list = lists_.data() + j * m;
    const double* xj = frame_.x().col(j).data();
    double w_left = 0.0;
    double wy_left = 0.0;
    for (std::uint32_t k = begin; k + 1 < end; ++k) {
      const std::uint32_t r = list[k];
      w_left += weight_[r];
      wy_left += weighted_y_[r];
      if (w_left < s) continue;
      const double w_right = w_total - w_left;
      if (w_right < s) break;
      const double here = xj[r];
      const double next = xj[list[k + 1]];
      if (!(next > here)) continue;
      // W_L W_R / W * (mean_L - mean_R)^2 with a single division.
      const double gap = wy_left * w_total - wy_total * w_left;
      const double decrease = gap * gap / (w_total * w_left * w_right);
      if (decrease > best.decrease) {
        double mid = 0.5 * (here + next);
        if (!std::isfinite(mid)) mid = here + 0.5 * (next - here);
        if (!(mid < next)) mid = here;
        best = {static_cast<std::int32_t>(j), mid, decrease};
      }
    }
  }
  return best;
}

void TreeGrower::partition(std::uint32_t begin, std::uint32_t end, std::size_t m,
                           const Split& split) {
  const double* xj = frame_.x().col(static_cast<std::size_t>(split.feature)).data();
  for (std::uint32_t k = begin; k < end; ++k) {
    const std::uint32_t r = lists_[k];
    goes_left_[r] = xj[r] <= split.threshold ? 1 : 0;
  }
  for (std::size_t f = 0; f < features_.size(); ++f) {
    std::uint32_t* list = lists_.data() + f * m;
    std::uint32_t write = begin;
    std::size_t spill = 0;
    // Branch-free: the direction is close to a coin flip.
    for (std::uint32_t k = begin; k < end; ++k) {
      const std::uint32_t r = list[k];
      const std::uint32_t left = goes_left_[r];
      list[write] = r;
      scratch_[spill] = r;
      write += left;
      spill += 1 - left;
    }
    std::copy_n(scratch_.begin(), spill, list + write);
  }
}

Tree TreeGrower::grow(std::span<const double> y, InbagVector inbag, const ForestConfig& config,
                      Rng& rng, bool keep_members) {
  const std::size_t n = frame_.rows();
  const std::size_t p = frame_.cols();
  if (y.size() != n) throw DataError("outcome length does not match the training rows");
  if (inbag.size() != n) throw DataError("inbag length does not match the training rows");

  Tree tree;
  tree.inbag = std::move(inbag);
  const auto& counts = tree.inbag.counts;

  std::size_t m = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (counts[r] == 0) continue;
    ++m;
    weight_[r] = counts[r];
    weighted_y_[r] = counts[r] * y[r];
  }
  lists_.resize(p * m);
  scratch_.resize(m);
  for (std::size_t j = 0; j < p; ++j) {
    std::uint32_t* list = lists_.data() + j * m;
    std::size_t k = 0;
    for (std::uint32_t r : frame_.order(j)) {
      if (counts[r] != 0) list[k++] = r;
    }
  }

  // Reset so the candidate draws depend only on this tree's stream.
  std::iota(features_.begin(), features_.end(), 0U);
  const std::size_t q = config.resolved_candidates(p);
  const double s = static_cast<double>(config.min_leaf);
  std::vector<std::uint32_t> members;
  if (keep_members) tree.member_offsets.push_back(0);

  tree.nodes.emplace_back();
  stack_.clear();
  stack_.push_back({0, 0, static_cast<std::uint32_t>(m), 0});
  while (!stack_.empty()) {
    const Pending cur = stack_.back();
    stack_.pop_back();

    double w = 0.0;
    double wy = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::uint32_t k = cur.begin; k < cur.end; ++k) {
      const std::uint32_t r = lists_[k];
      w += weight_[r];
      wy += weighted_y_[r];
      lo = std::min(lo, y[r]);
      hi = std::max(hi, y[r]);
    }

    bool leaf = cur.end - cur.begin < 2 || w < 2.0 * s || lo == hi ||
                (config.max_depth && cur.depth >= *config.max_depth);
    Split split;
    if (!leaf) {
      split = best_split(cur.begin, cur.end, m, w, wy, config.min_leaf, q, rng);
      leaf = split.feature < 0;
    }

    if (leaf) {
      Node& node = tree.nodes[cur.node];
      node.feature = -1;
      node.left = static_cast<std::uint32_t>(tree.leaf_values.size());
      tree.leaf_values.push_back(w <= 0.0 ? 0.0 : lo == hi ? lo : wy / w);
      if (keep_members) {
        members.assign(lists_.begin() + cur.begin, lists_.begin() + cur.end);
        std::sort(members.begin(), members.end());
        for (std::uint32_t r : members) {
          tree.member_rows.push_back(r);
          tree.member_counts.push_back(counts[r]);
        }
        tree.member_offsets.push_back(static_cast<std::uint32_t>(tree.member_rows.size()));
      }
      continue;
    }

    partition(cur.begin, cur.end, m, split);
    std::uint32_t mid = cur.begin;
    const double* xj = frame_.x().col(static_cast<std::size_t>(split.feature)).data();
    while (mid < cur.end && xj[lists_[mid]] <= split.threshold) ++mid;

    const auto left = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    Node& node = tree.nodes[cur.node];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = left + 1;
    stack_.push_back({left + 1, mid, cur.end, cur.depth + 1});
    stack_.push_back({left, cur.begin, mid, cur.depth + 1});
  }
  return tree;
}

std::vector<double> tree_weights(const Tree& tree, std::span<const double> x, std::size_t n) {
  std::vector<double> w(n, 0.0);
  const std::size_t leaf = tree.leaf_of(x);
  const auto rows = tree.leaf_rows(leaf);
  const auto counts = tree.leaf_counts(leaf);
  double total = 0.0;
  for (auto c : counts) total += c;
  if (total == 0.0) return w;
  for (std::size_t k = 0; k < rows.size(); ++k) w[rows[k]] = counts[k] / total;
  return w;
}

std::uint64_t tree_key(std::uint64_t seed, std::size_t b) noexcept {
  return derive_key(seed, "tree", static_cast<std::uint64_t>(b));
}

namespace {

std::size_t pool_size(std::size_t n, std::span<const std::uint32_t> eligible) {
  for (auto r : eligible) {
    if (r >= n) throw DataError("eligible row index out of range");
  }
  return eligible.empty() ? n : eligible.size();
}

}  // namespace

Forest fit_forest(const TrainingFrame& frame, std::span<const double> y, const ForestConfig& config,
                  OutcomeKind kind, std::size_t threads, std::span<const std::uint32_t> eligible) {
  const std::size_t n = frame.rows();
  config.validate(pool_size(n, eligible), frame.cols());
  if (y.size() != n) throw DataError("outcome length does not match the training rows");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) throw DataError("non-finite outcome at row " + std::to_string(i + 1));
  }
  if (kind == OutcomeKind::Binary) require_binary(std::vector<double>(y.begin(), y.end()));

  Forest forest;
  forest.config = config;
  forest.kind = kind;
  forest.num_features = frame.cols();
  forest.num_train = n;
  forest.trees.resize(config.num_trees);
  parallel_chunks(config.num_trees, threads, [&](std::size_t begin, std::size_t end) {
    TreeGrower grower(frame);
    for (std::size_t b = begin; b < end; ++b) {
      const std::uint64_t key = tree_key(config.seed, b);
      Rng rng(key);
      InbagVector inbag = draw_inbag(config, n, rng, eligible);
      forest.trees[b] = grower.grow(y, std::move(inbag), config, rng, true);
      forest.trees[b].seed = key;
    }
  });
  return forest;
}

ForestPrediction predict_forest(const Forest& forest, std::span<const double> x) {
  if (x.size() < forest.num_features) throw DataError("point has fewer coordinates than the forest");
  ForestPrediction out;
  out.per_tree.resize(forest.size());
  for (std::size_t b = 0; b < forest.size(); ++b) out.per_tree[b] = forest.trees[b].predict(x);
  // Offsets from the first tree: identical trees give their value exactly.
  const double base = out.per_tree.empty() ? 0.0 : out.per_tree[0];
  double sum = 0.0;
  for (double v : out.per_tree) sum += v - base;
  const auto B = static_cast<double>(forest.size());
  out.mean = base + sum / B;
  if (forest.size() > 1) {
    double ss = 0.0;
    for (double v : out.per_tree) ss += (v - out.mean) * (v - out.mean);
    out.tree_variance = ss / (B - 1.0);
  }
  return out;
}

std::vector<ForestPrediction> predict_forest(const Forest& forest, const Matrix& points,
                                             std::size_t threads) {
  std::vector<ForestPrediction> out(points.rows());
  parallel_for(points.rows(), threads,
               [&](std::size_t i) { out[i] = predict_forest(forest, points.row(i)); });
  return out;
}

std::vector<double> forest_weights(const Forest& forest, std::span<const double> x) {
  std::vector<double> w(forest.num_train, 0.0);
  for (const auto& tree : forest.trees) {
    const auto wb = tree_weights(tree, x, forest.num_train);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += wb[i];
  }
  const auto B = static_cast<double>(forest.size());
  for (double& v : w) v /= B;
  return w;
}

std::vector<std::optional<double>> predict_oob(const Forest& forest, const Matrix& x) {
  const std::size_t n = forest.num_train;
  if (x.rows() != n || x.cols() < forest.num_features) {
    throw DataError("out-of-bag prediction needs the training covariates");
  }
  const auto rows = x.row_major();
  const std::size_t stride = x.cols();
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> hits(n, 0);
  for (const auto& tree : forest.trees) {
    for (std::size_t i = 0; i < n; ++i) {
      if (tree.inbag.counts[i] != 0) continue;
      sum[i] += tree.leaf_values[tree.leaf_of(rows.data() + i * stride)];
      ++hits[i];
    }
  }
  std::vector<std::optional<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (hits[i] > 0) out[i] = sum[i] / static_cast<double>(hits[i]);
  }
  return out;
}

Matrix tree_predictions(const TrainingFrame& frame, std::span<const double> y,
                        const ForestConfig& config, const Matrix& points, std::size_t threads,
                        std::span<const std::uint32_t> eligible) {
  const std::size_t n = frame.rows();
  config.validate(pool_size(n, eligible), frame.cols());
  if (y.size() != n) throw DataError("outcome length does not match the training rows");
  if (points.cols() < frame.cols()) throw DataError("points have fewer columns than the training data");
  const auto rows = points.row_major();
  const std::size_t stride = points.cols();
  const std::size_t P = points.rows();
  Matrix out(config.num_trees, P);
  parallel_chunks(config.num_trees, threads, [&](std::size_t begin, std::size_t end) {
    TreeGrower grower(frame);
    for (std::size_t b = begin; b < end; ++b) {
      Rng rng(tree_key(config.seed, b));
      InbagVector inbag = draw_inbag(config, n, rng, eligible);
      const Tree tree = grower.grow(y, std::move(inbag), config, rng, false);
      for (std::size_t i = 0; i < P; ++i) {
        out(b, i) = tree.leaf_values[tree.leaf_of(rows.data() + i * stride)];
      }
    }
  });
  return out;
}

std::vector<double> forest_means(const Matrix& per_tree) {
  std::vector<double> out(per_tree.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto column = per_tree.col(i);
    out[i] = std::accumulate(column.begin(), column.end(), 0.0) /
             static_cast<double>(column.size());
  }
  return out;
}

}  // namespace rfcov::forest
