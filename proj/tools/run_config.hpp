#pragma once

// Run configuration for the rfcov command-line tool. A config file is a JSON
// object with global keys and one nested section per subcommand; flags given
// on the command line override values loaded from the file.

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rfcov::cli {

using Json = nlohmann::json;

/// Bad config file or flag value. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataPaths {
  std::string train;   // CSV with x1..xp and y
  std::string points;  // CSV with x1..xp (y ignored)
  std::string forest;  // forest artifact

  bool operator==(const DataPaths&) const = default;
};

struct DgmParams {
  std::size_t n = 400;
  std::size_t p = 10;
  std::size_t n_test = 400;  // matches dgm::kDefaultTestPoints
  double jitter_sd = 0.02;

  bool operator==(const DgmParams&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out = ".";
  std::string format = "csv";  // csv | json
  std::string kind;  // continuous | binary; empty means continuous, or the forest's kind
  double alpha = 0.05;
  DataPaths data;
  // Passed through to the library, which validates the keys.
  Json forest = Json::object();
  Json pasr = Json::object();
  Json scenario = Json::object();
  DgmParams dgm;

  bool operator==(const RunConfig&) const = default;

  void validate() const;
  std::string kind_or_default() const { return kind.empty() ? "continuous" : kind; }
  /// forest/pasr/scenario sections with the global seed (and threads where
  /// applicable) filled in.
  Json forest_json() const;
  Json pasr_json() const;
  Json scenario_json(const std::string& preset) const;
};

void to_json(Json& j, const RunConfig& c);
void from_json(const Json& j, RunConfig& c);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
/// Canonical text form; parse_run_config(dump_run_config(c)) == c.
std::string dump_run_config(const RunConfig& c);

/// FNV-1a 64 over the canonical form with the execution-only keys (threads,
/// out) removed, as 16 hex digits.
std::string config_hash(const RunConfig& c);

}  // namespace rfcov::cli
