#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace fs = std::filesystem;
using rfcov::cli::RunConfig;

namespace {

const std::string kCli = RFCOV_CLI_PATH;

// Scratch directory that lives for one test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("rfcov_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

int run(const std::string& args, const std::string& log = "/dev/null", const std::string& cwd = "") {
  const std::string cd = cwd.empty() ? "" : "cd \"" + cwd + "\" && ";
  const std::string cmd = cd + "\"" + kCli + "\" " + args + " >\"" + log + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

// Data rows of a CSV after its comment lines and header.
std::vector<std::vector<std::string>> rows_of(const std::string& text, std::vector<std::string>& header) {
  std::stringstream s(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  header.clear();
  while (std::getline(s, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = split(line);
    } else {
      rows.push_back(split(line));
    }
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  FAIL("missing column " << name);
  return 0;
}

const std::string kSmallPasr = " --replicates 5 --mc-trees 10 --crossfit-reps 1";

// dgm -> fit -> uncertainty inside `dir`, with relative paths so the command
// lines (and so the config hashes) are the same in every directory.
int pipeline(const Scratch& s, const std::string& extra, const std::string& kind = "continuous") {
  const std::string cwd = s.dir.string();
  int rc = run("dgm --n 80 --n-test 6 --kind " + kind + " --seed 5 --out .", "/dev/null", cwd);
  if (rc != 0) return rc;
  rc = run("fit --train train.csv --num-trees 30 --kind " + kind + " --seed 5 --out ." + extra,
           "/dev/null", cwd);
  if (rc != 0) return rc;
  return run("uncertainty --forest forest.json --train train.csv --points test.csv --seed 5 --out ." +
                 kSmallPasr + extra,
             "/dev/null", cwd);
}

}  // namespace

TEST_CASE("run config round trip") {
  RunConfig c;
  c.seed = 18446744073709551615ULL;
  c.threads = 3;
  c.out = "results/a b";
  c.format = "json";
  c.kind = "binary";
  c.alpha = 0.1;
  c.data.train = "t.csv";
  c.forest = rfcov::cli::Json::parse(R"({"num_trees": 12, "sampling": "subsample"})");
  c.pasr = rfcov::cli::Json::parse(R"({"replicates": 7})");
  c.dgm.n = 123;
  c.dgm.jitter_sd = 0.1;
  const auto text = rfcov::cli::dump_run_config(c);
  const auto back = rfcov::cli::parse_run_config(text);
  CHECK(back == c);
  CHECK(rfcov::cli::dump_run_config(back) == text);
  CHECK(rfcov::cli::parse_run_config(rfcov::cli::dump_run_config(RunConfig{})) == RunConfig{});

  CHECK_THROWS_AS(rfcov::cli::parse_run_config(R"({"sed": 1})"), rfcov::cli::ConfigError);
  CHECK_THROWS_AS(rfcov::cli::parse_run_config(R"({"threads": -1})"), rfcov::cli::ConfigError);
  CHECK_THROWS_AS(rfcov::cli::parse_run_config(R"({"dgm": {"n": -5}})"), rfcov::cli::ConfigError);
  CHECK_THROWS_AS(rfcov::cli::parse_run_config(R"({"format": "xml"})"), rfcov::cli::ConfigError);
  CHECK_THROWS_AS(rfcov::cli::parse_run_config("{"), rfcov::cli::ConfigError);

  auto d = c;
  d.threads = 8;
  d.out = "elsewhere";
  CHECK(rfcov::cli::config_hash(d) == rfcov::cli::config_hash(c));
  d.seed = 2;
  CHECK(rfcov::cli::config_hash(d) != rfcov::cli::config_hash(c));
  CHECK(rfcov::cli::config_hash(c).size() == 16);
}

TEST_CASE("pipeline output is reproducible and thread independent") {
  Scratch a("repro_a"), b("repro_b"), c("repro_c");
  REQUIRE(pipeline(a, " --threads 1") == 0);
  REQUIRE(pipeline(b, " --threads 1") == 0);
  REQUIRE(pipeline(c, " --threads 8") == 0);
  for (const char* f : {"train.csv", "test.csv", "forest.json", "predictions.csv", "intervals.csv",
                        "floor.csv"}) {
    CAPTURE(f);
    const auto ref = slurp(a / f);
    CHECK(!ref.empty());
    CHECK(slurp(b / f) == ref);
    CHECK(slurp(c / f) == ref);
  }
}

TEST_CASE("interval output") {
  Scratch s("intervals");
  REQUIRE(pipeline(s, "") == 0);
  const auto text = slurp(s / "intervals.csv");
  CHECK(text.rfind("# tool: rfcov 0.1.0\n", 0) == 0);
  CHECK(text.find("# alpha: 0.05\n") != std::string::npos);
  CHECK(text.find("# config_hash: ") != std::string::npos);
  std::vector<std::string> h;
  const auto rows = rows_of(text, h);
  REQUIRE(rows.size() == 6);
  const auto out = column(h, "var_outcome"), mc = column(h, "var_mc"), fl = column(h, "var_floor"),
             tot = column(h, "var_total"), lo = column(h, "lo"), hi = column(h, "hi"),
             est = column(h, "estimate");
  for (const auto& r : rows) {
    const double sum = std::stod(r[out]) + std::stod(r[mc]) + std::stod(r[fl]);
    CHECK(std::stod(r[tot]) == doctest::Approx(sum).epsilon(1e-12));
    CHECK(std::stod(r[fl]) >= 0.0);
    CHECK(std::stod(r[lo]) <= std::stod(r[est]));
    CHECK(std::stod(r[hi]) >= std::stod(r[est]));
    CHECK(std::stod(r[column(h, "alpha")]) == 0.05);
  }
  std::vector<std::string> fh;
  const auto floor_rows = rows_of(slurp(s / "floor.csv"), fh);
  REQUIRE(floor_rows.size() == 6);
  CHECK(floor_rows[0][column(fh, "n_replicates")] == "5");
  CHECK(floor_rows[0][column(fh, "b_mc")] == "10");
}

TEST_CASE("json output and saved configs") {
  Scratch s("json");
  REQUIRE(run("dgm --n 60 --n-test 4 --out " + s.dir.string()) == 0);
  REQUIRE(run("fit --train " + s / "train.csv" + " --num-trees 10 --format json --out " + s.dir.string() +
              " --save-config " + s / "fit.json") == 0);
  const auto preds = slurp(s / "predictions.json");
  CHECK(preds.find("\"tree_variance\"") != std::string::npos);
  CHECK(preds.find("\"config_hash\"") != std::string::npos);
  // Replaying the saved config reproduces the artifact.
  const auto forest = slurp(s / "forest.json");
  fs::remove(s / "forest.json");
  REQUIRE(run("fit --config " + s / "fit.json") == 0);
  CHECK(slurp(s / "forest.json") == forest);
  // Flags override the file.
  REQUIRE(run("fit --config " + s / "fit.json" + " --num-trees 11") == 0);
  CHECK(slurp(s / "forest.json") != forest);
}

TEST_CASE("exit codes") {
  Scratch s("exit");
  spit(s / "no_y.csv", "x1,x2\n1,2\n3,4\n5,6\n");
  CHECK(run("fit --train " + s / "no_y.csv" + " --out " + s.dir.string()) == 2);
  spit(s / "bad.csv", "x1,y\n1,2\n3,abc\n");
  CHECK(run("fit --train " + s / "bad.csv" + " --out " + s.dir.string()) == 3);
  REQUIRE(run("dgm --n 60 --n-test 4 --out " + s.dir.string()) == 0);
  // Continuous outcomes are not valid binary labels.
  CHECK(run("fit --train " + s / "train.csv" + " --kind binary --out " + s.dir.string()) == 3);
  CHECK(run("fit --train " + s / "train.csv" + " --candidates 11 --out " + s.dir.string()) == 2);
  CHECK(run("fit --out " + s.dir.string()) == 2);
  CHECK(run("fit --train " + s / "train.csv" + " --num-trees banana") == 2);
  CHECK(run("dgm --p 11 --out " + s.dir.string()) == 2);
  spit(s / "cfg.json", R"({"seed": 1, "unknown": 2})");
  CHECK(run("dgm --config " + s / "cfg.json" + " --out " + s.dir.string()) == 2);

  const auto log = s / "log.txt";
  CHECK(run("experiment no-such-thing --out " + s.dir.string(), log) == 2);
  CHECK(slurp(log).find("overlap") != std::string::npos);

  REQUIRE(run("fit --train " + s / "train.csv" + " --num-trees 10 --out " + s.dir.string()) == 0);
  CHECK(run("uncertainty --forest " + s / "forest.json" + " --train " + s / "train.csv" +
            " --kind binary --out " + s.dir.string()) == 2);
  CHECK(run("uncertainty --forest " + s / "forest.json" + " --train " + s / "train.csv" +
            " --alpha 1.5 --out " + s.dir.string()) == 2);
}

TEST_CASE("binary pipeline") {
  Scratch s("binary");
  REQUIRE(pipeline(s, "", "binary") == 0);
  std::vector<std::string> h;
  const auto rows = rows_of(slurp(s / "intervals.csv"), h);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(std::stod(r[column(h, "var_outcome")]) == 0.0);
    CHECK(std::stod(r[column(h, "lo_clamped")]) >= 0.0);
    CHECK(std::stod(r[column(h, "hi_clamped")]) <= 1.0);
  }
  CHECK(slurp(s / "intervals.csv").find("# kind: binary\n") != std::string::npos);
}

TEST_CASE("experiment subcommand") {
  Scratch s("experiment");
  const auto log = s / "log.txt";
  CHECK(run("experiment overlap --preset challenging --check --out " + s.dir.string(), log) == 0);
  CHECK(slurp(log).find("overlap: all checks passed") != std::string::npos);
  std::vector<std::string> h;
  const auto rows = rows_of(slurp(s / "overlap.csv"), h);
  REQUIRE(!rows.empty());
  CHECK(rows[0][column(h, "scenario")] == "challenging");
  CHECK(rows[0][column(h, "n")] == "200");
  CHECK(rows[0][column(h, "p")] == "30");
  CHECK(rows[0][column(h, "q")] == "6");
  CHECK(rows[0][column(h, "sampling")] == "bootstrap");
  const auto summary = slurp(s / "overlap_summary.json");
  CHECK(summary.find("\"passed\"") != std::string::npos);
}
