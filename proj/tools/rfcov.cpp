// rfcov command-line tool: fit, uncertainty, experiment, dgm.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rfcov/rfcov.h"
#include "run_config.hpp"

namespace fs = std::filesystem;
using rfcov::cli::ConfigError;
using rfcov::cli::Json;
using rfcov::cli::RunConfig;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kCheckFailed = 4 };

// Library failure carrying the exit code it maps to.
struct Failure {
  int code;
  std::string message;
};

void check(rfcov_status status) {
  if (status == RFCOV_OK) return;
  int code = kInternal;
  switch (status) {
    case RFCOV_ERR_CONFIG:
    case RFCOV_ERR_IO:  // unreadable input path or unwritable output
      code = kConfig;
      break;
    case RFCOV_ERR_DATA:
      code = kData;
      break;
    default:
      break;
  }
  throw Failure{code, rfcov_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<rfcov_dataset, Deleter<rfcov_dataset, rfcov_dataset_free>>;
using Forest = std::unique_ptr<rfcov_forest, Deleter<rfcov_forest, rfcov_forest_free>>;
using Report = std::unique_ptr<rfcov_report, Deleter<rfcov_report, rfcov_report_free>>;
using Experiment =
    std::unique_ptr<rfcov_experiment, Deleter<rfcov_experiment, rfcov_experiment_free>>;

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

// Rectangular numeric output, written as CSV (with "# key: value" metadata
// lines) or as a JSON object.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{kConfig, "cannot open '" + path.string() + "' for writing"};
  out << text;
  if (!out) throw Failure{kConfig, "failed writing '" + path.string() + "'"};
}

std::string metadata_lines(const Metadata& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += "# " + k + ": " + v + "\n";
  return out;
}

void write_table(const fs::path& stem, const std::string& format, const Table& t,
                 const Metadata& meta) {
  if (format == "json") {
    Json j;
    j["metadata"] = Json::object();
    for (const auto& [k, v] : meta) j["metadata"][k] = v;
    j["columns"] = t.columns;
    j["rows"] = Json::array();
    for (const auto& r : t.rows) {
      Json row = Json::array();
      for (double v : r) row.push_back(std::isnan(v) ? Json(nullptr) : Json(v));
      j["rows"].push_back(std::move(row));
    }
    write_file(stem.string() + ".json", j.dump(2) + "\n");
    return;
  }
  std::string text = metadata_lines(meta);
  for (std::size_t c = 0; c < t.columns.size(); ++c) text += (c ? "," : "") + t.columns[c];
  text += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) text += (c ? "," : "") + fmt(r[c]);
    text += '\n';
  }
  write_file(stem.string() + ".csv", text);
}

Table dataset_table(const rfcov_dataset* d) {
  const std::size_t n = rfcov_dataset_rows(d), p = rfcov_dataset_cols(d);
  const bool has_y = rfcov_dataset_has_y(d) != 0;
  std::vector<double> x(n * p), y(has_y ? n : 0);
  check(rfcov_dataset_copy(d, x.data(), has_y ? y.data() : nullptr));
  Table t;
  for (std::size_t j = 0; j < p; ++j) t.columns.push_back("x" + std::to_string(j + 1));
  if (has_y) t.columns.push_back("y");
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(x.begin() + static_cast<std::ptrdiff_t>(i * p),
                            x.begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
    if (has_y) row.push_back(y[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Dataset read_dataset(const std::string& path, bool require_y, const char* what) {
  if (path.empty()) throw Failure{kConfig, std::string("no ") + what + " file given"};
  rfcov_dataset* d = nullptr;
  check(rfcov_dataset_read_csv(path.c_str(), require_y ? 1 : 0, &d));
  return Dataset(d);
}

Metadata base_metadata(const RunConfig& c, const std::string& command) {
  return {{"tool", std::string("rfcov ") + rfcov_version()},
          {"command", command},
          {"config_hash", rfcov::cli::config_hash(c)},
          {"seed", std::to_string(c.seed)}};
}

fs::path prepare_out(const RunConfig& c) {
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Failure{kConfig, "cannot create output directory '" + c.out + "': " + ec.message()};
  return out;
}

int run_fit(const RunConfig& c) {
  Dataset train = read_dataset(c.data.train, true, "training data");
  const std::string cfg = c.forest_json().dump();
  rfcov_forest* raw = nullptr;
  check(rfcov_forest_fit(train.get(), c.kind_or_default().c_str(), cfg.c_str(), c.threads, &raw));
  Forest forest(raw);

  Dataset points = c.data.points.empty() ? nullptr : read_dataset(c.data.points, false, "points");
  const rfcov_dataset* at = points ? points.get() : train.get();
  const std::size_t n = rfcov_dataset_rows(at);
  std::vector<double> mean(n), tv(n);
  check(rfcov_forest_predict(forest.get(), at, mean.data(), tv.data()));

  const fs::path out = prepare_out(c);
  check(rfcov_forest_save(forest.get(), (out / "forest.json").string().c_str()));
  Table t{{"test_id", "estimate", "tree_variance"}, {}};
  for (std::size_t i = 0; i < n; ++i) t.rows.push_back({double(i + 1), mean[i], tv[i]});
  auto meta = base_metadata(c, "fit");
  meta.emplace_back("kind", c.kind_or_default());
  meta.emplace_back("num_trees", std::to_string(rfcov_forest_num_trees(forest.get())));
  write_table(out / "predictions", c.format, t, meta);
  return kOk;
}

int run_uncertainty(const RunConfig& c) {
  if (c.data.forest.empty()) throw Failure{kConfig, "no forest artifact given"};
  rfcov_forest* raw = nullptr;
  check(rfcov_forest_load(c.data.forest.c_str(), &raw));
  Forest forest(raw);
  Dataset train = read_dataset(c.data.train, true, "training data");
  Dataset points = read_dataset(c.data.points, false, "points");
  const std::string pasr = c.pasr_json().dump();
  rfcov_report* rep = nullptr;
  const char* kind = c.kind.empty() ? nullptr : c.kind.c_str();
  check(rfcov_uncertainty(forest.get(), train.get(), points.get(), kind, pasr.c_str(), c.alpha,
                          c.threads, &rep));
  Report report(rep);

  Table intervals{{"test_id", "estimate", "lo", "hi", "lo_clamped", "hi_clamped", "var_outcome",
                   "var_mc", "var_floor", "alpha", "var_total"},
                  {}};
  Table floor{{"test_id", "c_t_hat", "c_t_hat_clamped", "n_replicates", "b_mc"}, {}};
  std::size_t reps = 0, mc = 0;
  check(rfcov_report_floor_info(report.get(), &reps, &mc));
  const double replicates = double(reps), mc_trees = double(mc);
  for (std::size_t i = 0; i < rfcov_report_size(report.get()); ++i) {
    rfcov_interval e{};
    check(rfcov_report_entry(report.get(), i, &e));
    const double id = double(i + 1);
    intervals.rows.push_back({id, e.estimate, e.lower, e.upper, e.lower_clamped, e.upper_clamped,
                              e.var_outcome, e.var_mc, e.var_floor, e.alpha, e.var_total});
    floor.rows.push_back({id, e.floor_raw, e.var_floor, replicates, mc_trees});
  }
  const fs::path out = prepare_out(c);
  auto meta = base_metadata(c, "uncertainty");
  meta.emplace_back("kind", rfcov_forest_kind(forest.get()));
  meta.emplace_back("alpha", fmt(c.alpha));
  meta.emplace_back("num_trees", std::to_string(rfcov_forest_num_trees(forest.get())));
  write_table(out / "intervals", c.format, intervals, meta);
  write_table(out / "floor", c.format, floor, meta);
  return kOk;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) out.push_back(item);
  return out;
}

int run_experiment(const RunConfig& c, const std::string& name,
                   const std::optional<std::string>& preset_flag, bool check_mode) {
  const std::string preset =
      preset_flag ? *preset_flag : c.scenario.value("name", std::string("favorable"));
  const auto names = split_names(rfcov_experiment_names());
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string list;
    for (const auto& n : names) list += "\n  " + n;
    throw Failure{kConfig, "unknown experiment '" + name + "'; valid names:" + list};
  }
  const std::string scenario = c.scenario_json(preset).dump();
  Json meta_json = Json::object();
  for (const auto& [k, v] : base_metadata(c, "experiment " + name)) meta_json[k] = v;
  meta_json["alpha"] = fmt(c.alpha);
  const std::string meta = meta_json.dump();

  rfcov_experiment* raw = nullptr;
  check(rfcov_experiment_run(name.c_str(), scenario.c_str(), meta.c_str(), &raw));
  Experiment exp(raw);

  const fs::path out = prepare_out(c);
  const std::string csv = rfcov_experiment_csv(exp.get());
  if (c.format == "json") {
    Json rows = Json::array();
    std::vector<std::string> header;
    std::stringstream in(csv);
    for (std::string line; std::getline(in, line);) {
      if (line.empty() || line[0] == '#') continue;
      auto fields = split_names(line);
      if (header.empty()) {
        header = fields;
        continue;
      }
      Json row = Json::object();
      for (std::size_t i = 0; i < header.size() && i < fields.size(); ++i) row[header[i]] = fields[i];
      rows.push_back(std::move(row));
    }
    write_file(out / (name + ".json"), Json{{"metadata", meta_json}, {"rows", rows}}.dump(2) + "\n");
  } else {
    write_file(out / (name + ".csv"), csv);
  }
  Json summary = Json::parse(rfcov_experiment_summary(exp.get()));
  summary["metadata"] = meta_json;
  write_file(out / (name + "_summary.json"), summary.dump(2) + "\n");

  const bool passed = rfcov_experiment_passed(exp.get()) != 0;
  std::cout << name << ": " << (passed ? "all checks passed" : "some checks failed") << "\n";
  return check_mode && !passed ? kCheckFailed : kOk;
}

int run_dgm(const RunConfig& c) {
  rfcov_dataset* tr = nullptr;
  rfcov_dataset* te = nullptr;
  check(rfcov_dgm_generate(c.dgm.n, c.dgm.p, c.kind_or_default().c_str(), c.seed, c.dgm.n_test,
                           c.dgm.jitter_sd, &tr, &te));
  Dataset train(tr), test(te);
  const fs::path out = prepare_out(c);
  auto meta = base_metadata(c, "dgm");
  meta.emplace_back("kind", c.kind_or_default());
  write_table(out / "train", c.format, dataset_table(train.get()), meta);
  if (test) {
    const bool binary = c.kind_or_default() == "binary";
    meta.emplace_back("y", binary ? "true probability" : "true conditional mean");
    write_table(out / "test", c.format, dataset_table(test.get()), meta);
  }
  return kOk;
}

// Flag values that override the config file when given.
struct Overrides {
  std::string config;
  std::string save_config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out, format, kind;
  std::optional<double> alpha;
  std::optional<std::string> train, points, forest;
  std::optional<std::size_t> num_trees, candidates, min_leaf, max_depth;
  std::optional<std::string> sampling;
  std::optional<double> sample_fraction;
  std::optional<std::size_t> replicates, mc_trees, crossfit_reps;
  std::optional<std::size_t> n, p, n_test;
  std::optional<double> jitter_sd;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : rfcov::cli::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.out = *o.out;
  if (o.format) c.format = *o.format;
  if (o.kind) c.kind = *o.kind;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.train) c.data.train = *o.train;
  if (o.points) c.data.points = *o.points;
  if (o.forest) c.data.forest = *o.forest;
  if (o.num_trees) c.forest["num_trees"] = *o.num_trees;
  if (o.candidates) c.forest["candidates"] = *o.candidates;
  if (o.min_leaf) c.forest["min_leaf"] = *o.min_leaf;
  if (o.max_depth) c.forest["max_depth"] = *o.max_depth;
  if (o.sampling) c.forest["sampling"] = *o.sampling;
  if (o.sample_fraction) c.forest["sample_fraction"] = *o.sample_fraction;
  if (o.replicates) c.pasr["replicates"] = *o.replicates;
  if (o.mc_trees) c.pasr["mc_trees"] = *o.mc_trees;
  if (o.crossfit_reps) c.pasr["crossfit_reps"] = *o.crossfit_reps;
  if (o.n) c.dgm.n = *o.n;
  if (o.p) c.dgm.p = *o.p;
  if (o.n_test) c.dgm.n_test = *o.n_test;
  if (o.jitter_sd) c.dgm.jitter_sd = *o.jitter_sd;
  c.validate();
  return c;
}

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON run config; flags override its values")
      ->check(CLI::ExistingFile);
  app->add_option("--save-config", o.save_config, "Write the effective run config to this path");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--threads", o.threads, "Worker threads (outputs do not depend on it)");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

void add_kind(CLI::App* app, Overrides& o) {
  app->add_option("--kind", o.kind, "Outcome kind")->check(CLI::IsMember({"continuous", "binary"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random forest prediction uncertainty with a covariance floor"};
  app.set_version_flag("--version", std::string(rfcov_version()));
  app.require_subcommand(1);
  Overrides o;
  std::string experiment_name;
  std::optional<std::string> preset;
  bool check_mode = false;

  auto* fit = app.add_subcommand("fit", "Train a forest and write predictions with tree variance");
  add_common(fit, o);
  add_kind(fit, o);
  fit->add_option("--train", o.train, "Training CSV (x1..xp, y)");
  fit->add_option("--points", o.points, "Prediction points CSV (default: training rows)");
  fit->add_option("--num-trees", o.num_trees, "Number of trees B");
  fit->add_option("--candidates", o.candidates, "Split candidates per node q (0: floor(sqrt(p)))");
  fit->add_option("--min-leaf", o.min_leaf, "Minimum leaf size s");
  fit->add_option("--max-depth", o.max_depth, "Maximum tree depth");
  fit->add_option("--sampling", o.sampling, "bootstrap or subsample");
  fit->add_option("--sample-fraction", o.sample_fraction, "Subsample fraction");

  auto* unc = app.add_subcommand("uncertainty", "Covariance floor and intervals for a forest");
  add_common(unc, o);
  add_kind(unc, o);
  unc->add_option("--forest", o.forest, "Forest artifact written by fit");
  unc->add_option("--train", o.train, "Training CSV used to fit the forest");
  unc->add_option("--points", o.points, "Test points CSV");
  unc->add_option("--alpha", o.alpha, "Miscoverage level (default 0.05)");
  unc->add_option("--replicates", o.replicates, "Synthetic replicates R");
  unc->add_option("--mc-trees", o.mc_trees, "Trees per paired forest");
  unc->add_option("--crossfit-reps", o.crossfit_reps, "Cross-fit repetitions for the mean");

  auto* exp = app.add_subcommand("experiment", "Run a validation experiment");
  add_common(exp, o);
  add_kind(exp, o);
  exp->add_option("name", experiment_name, "Experiment name")->required();
  exp->add_option("--preset", preset, "Scenario preset (favorable, challenging, stress)");
  exp->add_option("--alpha", o.alpha, "Nominal miscoverage for coverage runs");
  exp->add_flag("--check", check_mode, "Exit with status 4 when an acceptance check fails");

  auto* dgm = app.add_subcommand("dgm", "Write a simulated training set and test points");
  add_common(dgm, o);
  add_kind(dgm, o);
  dgm->add_option("--n", o.n, "Training rows");
  dgm->add_option("--p", o.p, "Observed predictors (10 or at least 30)");
  dgm->add_option("--n-test", o.n_test, "Test points");
  dgm->add_option("--jitter-sd", o.jitter_sd, "Test point jitter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const RunConfig c = resolve(o);
    if (!o.save_config.empty()) write_file(o.save_config, rfcov::cli::dump_run_config(c));
    if (*fit) return run_fit(c);
    if (*unc) return run_uncertainty(c);
    if (*exp) return run_experiment(c, experiment_name, preset, check_mode);
    return run_dgm(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const Failure& f) {
    std::cerr << (f.code == kData ? "data error: " : f.code == kConfig ? "config error: " : "error: ")
              << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
}
