#include "run_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <type_traits>

namespace rfcov::cli {

namespace {

void known_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    // nlohmann wraps negative numbers into huge unsigned values.
    if (!v.is_number_unsigned()) throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  }
  out = v.get<T>();
}

void section(const Json& j, const char* key, Json& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_object()) throw ConfigError(std::string("section '") + key + "' must be an object");
  out = j.at(key);
}

}  // namespace

void RunConfig::validate() const {
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (format != "csv" && format != "json") {
    throw ConfigError("format must be csv or json, got '" + format + "'");
  }
  if (!kind.empty() && kind != "continuous" && kind != "binary") {
    throw ConfigError("kind must be continuous or binary, got '" + kind + "'");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (dgm.n == 0) throw ConfigError("dgm.n must be at least 1");
  if (!(dgm.jitter_sd >= 0.0) || !std::isfinite(dgm.jitter_sd)) {
    throw ConfigError("dgm.jitter_sd must be finite and nonnegative");
  }
}

Json RunConfig::forest_json() const {
  Json j = forest;
  j["seed"] = seed;
  return j;
}

Json RunConfig::pasr_json() const {
  Json j = pasr;
  j["seed"] = seed;
  return j;
}

Json RunConfig::scenario_json(const std::string& preset) const {
  Json j = scenario;
  j["name"] = preset;
  j["kind"] = kind_or_default();
  j["seed"] = seed;
  j["threads"] = threads;
  j["alpha"] = alpha;
  return j;
}

void to_json(Json& j, const RunConfig& c) {
  j = Json{{"seed", c.seed},
           {"threads", c.threads},
           {"out", c.out},
           {"format", c.format},
           {"kind", c.kind},
           {"alpha", c.alpha},
           {"data", {{"train", c.data.train}, {"points", c.data.points}, {"forest", c.data.forest}}},
           {"forest", c.forest},
           {"pasr", c.pasr},
           {"scenario", c.scenario},
           {"dgm",
            {{"n", c.dgm.n}, {"p", c.dgm.p}, {"n_test", c.dgm.n_test}, {"jitter_sd", c.dgm.jitter_sd}}}};
}

void from_json(const Json& j, RunConfig& c) {
  try {
    known_keys(j,
               {"seed", "threads", "out", "format", "kind", "alpha", "data", "forest", "pasr",
                "scenario", "dgm"},
               "config");
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    read(j, "out", c.out);
    read(j, "format", c.format);
    read(j, "kind", c.kind);
    read(j, "alpha", c.alpha);
    if (j.contains("data")) {
      const Json& d = j.at("data");
      known_keys(d, {"train", "points", "forest"}, "data");
      read(d, "train", c.data.train);
      read(d, "points", c.data.points);
      read(d, "forest", c.data.forest);
    }
    section(j, "forest", c.forest);
    section(j, "pasr", c.pasr);
    section(j, "scenario", c.scenario);
    if (j.contains("dgm")) {
      const Json& d = j.at("dgm");
      known_keys(d, {"n", "p", "n_test", "jitter_sd"}, "dgm");
      read(d, "n", c.dgm.n);
      read(d, "p", c.dgm.p);
      read(d, "n_test", c.dgm.n_test);
      read(d, "jitter_sd", c.dgm.jitter_sd);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string dump_run_config(const RunConfig& c) { return Json(c).dump(2) + "\n"; }

std::string config_hash(const RunConfig& c) {
  Json j = c;
  j.erase("threads");
  j.erase("out");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rfcov::cli
