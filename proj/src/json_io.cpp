#include "rfcov/json_io.hpp"

namespace rfcov {

Json parse_json(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("invalid JSON in " + what + ": " + e.what());
  }
}

void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        const std::string& section) {
  if (!object.is_object()) throw ConfigError(section + " must be a JSON object");
  for (const auto& item : object.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + section);
  }
}

namespace forest {

void to_json(Json& j, const ForestConfig& config) {
  j = Json{{"num_trees", config.num_trees},
           {"candidates", config.candidates},
           {"sampling", to_string(config.sampling)},
           {"sample_fraction", config.sample_fraction},
           {"min_leaf", config.min_leaf},
           {"max_depth", nullptr},
           {"seed", config.seed}};
  if (config.max_depth) j["max_depth"] = *config.max_depth;
}

void from_json(const Json& j, ForestConfig& config) {
  require_known_keys(j,
                     {"num_trees", "candidates", "sampling", "sample_fraction", "min_leaf",
                      "max_depth", "seed"},
                     "forest config");
  try {
    read_field(j, "num_trees", config.num_trees);
    read_field(j, "candidates", config.candidates);
    if (j.contains("sampling")) config.sampling = parse_sampling(j.at("sampling").get<std::string>());
    if (j.contains("sample_fraction")) config.sample_fraction = j.at("sample_fraction").get<double>();
    read_field(j, "min_leaf", config.min_leaf);
    if (j.contains("max_depth")) {
      const auto& d = j.at("max_depth");
      if (d.is_null()) {
        config.max_depth.reset();
      } else {
        config.max_depth = get_checked<std::size_t>(d);
      }
    }
    if (j.contains("seed")) config.seed = get_checked<std::uint64_t>(j.at("seed"));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("forest config: ") + e.what());
  }
}

}  // namespace forest

namespace pasr {

void to_json(Json& j, const PasrConfig& c) {
  j = Json{{"replicates", c.replicates},
           {"mc_trees", c.mc_trees},
           {"crossfit_reps", c.crossfit_reps},
           {"epsilon", c.epsilon},
           {"variance_trees", c.variance_trees},
           {"variance_min_leaf", c.variance_min_leaf},
           {"variance_candidates", c.variance_candidates},
           {"seed", c.seed}};
}

void from_json(const Json& j, PasrConfig& c) {
  require_known_keys(j,
                     {"replicates", "mc_trees", "crossfit_reps", "epsilon", "variance_trees",
                      "variance_min_leaf", "variance_candidates", "seed"},
                     "pasr config");
  try {
    read_field(j, "replicates", c.replicates);
    read_field(j, "mc_trees", c.mc_trees);
    read_field(j, "crossfit_reps", c.crossfit_reps);
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    read_field(j, "variance_trees", c.variance_trees);
    if (j.contains("variance_min_leaf")) {
      read_field(j, "variance_min_leaf", c.variance_min_leaf);
    }
    if (j.contains("variance_candidates")) {
      read_field(j, "variance_candidates", c.variance_candidates);
    }
    if (j.contains("seed")) c.seed = get_checked<std::uint64_t>(j.at("seed"));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("pasr config: ") + e.what());
  }
}

}  // namespace pasr
}  // namespace rfcov
