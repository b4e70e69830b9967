#include <fstream>
#include <sstream>

#include "rfcov/forest.hpp"
#include "rfcov/json_io.hpp"

namespace rfcov {

namespace {
constexpr const char* kFormat = "rfcov-forest";
constexpr int kVersion = 1;
}  // namespace

namespace forest {

std::string to_json(const Forest& forest) {
  Json trees = Json::array();
  for (const auto& tree : forest.trees) {
    Json feature = Json::array();
    Json threshold = Json::array();
    Json left = Json::array();
    Json right = Json::array();
    for (const auto& node : tree.nodes) {
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
    }
    trees.push_back(Json{{"seed", tree.seed},
                         {"feature", std::move(feature)},
                         {"threshold", std::move(threshold)},
                         {"left", std::move(left)},
                         {"right", std::move(right)},
                         {"leaf_values", tree.leaf_values},
                         {"member_offsets", tree.member_offsets},
                         {"member_rows", tree.member_rows},
                         {"member_counts", tree.member_counts},
                         {"inbag", tree.inbag.counts}});
  }
  Json doc{{"format", kFormat},
           {"version", kVersion},
           {"kind", std::string(rfcov::to_string(forest.kind))},
           {"num_features", forest.num_features},
           {"num_train", forest.num_train},
           {"config", forest.config},
           {"trees", std::move(trees)}};
  return doc.dump();
}

Forest from_json(std::string_view text) {
  try {
    const Json doc = Json::parse(text);
    if (doc.value("format", std::string()) != kFormat) {
      throw DataError("not a forest artifact (missing format tag)");
    }
    const int version = doc.at("version").get<int>();
    if (version != kVersion) {
      throw DataError("unsupported forest artifact version " + std::to_string(version));
    }
    Forest forest;
    forest.kind = parse_outcome_kind(doc.at("kind").get<std::string>());
    forest.num_features = doc.at("num_features").get<std::size_t>();
    forest.num_train = doc.at("num_train").get<std::size_t>();
    forest.config = doc.at("config").get<ForestConfig>();
    for (const auto& t : doc.at("trees")) {
      Tree tree;
      tree.seed = t.at("seed").get<std::uint64_t>();
      const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<std::uint32_t>>();
      const auto right = t.at("right").get<std::vector<std::uint32_t>>();
      if (threshold.size() != feature.size() || left.size() != feature.size() ||
          right.size() != feature.size() || feature.empty()) {
        throw DataError("forest artifact has inconsistent node arrays");
      }
      tree.leaf_values = t.at("leaf_values").get<std::vector<double>>();
      tree.member_offsets = t.at("member_offsets").get<std::vector<std::uint32_t>>();
      tree.member_rows = t.at("member_rows").get<std::vector<std::uint32_t>>();
      tree.member_counts = t.at("member_counts").get<std::vector<std::uint32_t>>();
      tree.inbag.counts = t.at("inbag").get<std::vector<std::uint32_t>>();
      tree.nodes.resize(feature.size());
      for (std::size_t k = 0; k < feature.size(); ++k) {
        Node& node = tree.nodes[k];
        node = {feature[k], threshold[k], left[k], right[k]};
        const bool ok = node.is_leaf()
                            ? node.left < tree.leaf_values.size()
                            : static_cast<std::size_t>(node.feature) < forest.num_features &&
                                  node.left < feature.size() && node.right < feature.size() &&
                                  node.left > k && node.right > k;
        if (!ok) throw DataError("forest artifact has an invalid node");
      }
      if (tree.has_members() && tree.member_offsets.size() != tree.leaf_values.size() + 1) {
        throw DataError("forest artifact has inconsistent leaf members");
      }
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) throw DataError("forest artifact has no trees");
    return forest;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed forest artifact: ") + e.what());
  }
}

void save_forest(const Forest& forest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json(forest) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

Forest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

}  // namespace forest
}  // namespace rfcov
