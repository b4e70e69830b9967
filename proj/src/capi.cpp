#include "rfcov/rfcov.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <limits>
#include <string>

#include "rfcov/csv.hpp"
#include "rfcov/dgm.hpp"
#include "rfcov/error.hpp"
#include "rfcov/experiments.hpp"
#include "rfcov/forest.hpp"
#include "rfcov/intervals.hpp"
#include "rfcov/json_io.hpp"
#include "rfcov/pasr.hpp"

using namespace rfcov;

struct rfcov_dataset {
  csv::Dataset data;
};

struct rfcov_forest {
  forest::Forest forest;
};

struct rfcov_report {
  intervals::IntervalReport report;
  std::vector<double> floor;
  std::size_t replicates = 0;
  std::size_t mc_trees = 0;
};

struct rfcov_experiment {
  std::string csv;
  std::string summary;
  bool passed = false;
};

namespace {

thread_local std::string last_error;

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class F>
rfcov_status guard(F&& body) noexcept {
  try {
    last_error.clear();
    body();
    return RFCOV_OK;
  } catch (const ArgumentError& e) {
    last_error = e.what();
    return RFCOV_ERR_ARGUMENT;
  } catch (const ConfigError& e) {
    last_error = e.what();
    return RFCOV_ERR_CONFIG;
  } catch (const DataError& e) {
    last_error = e.what();
    return RFCOV_ERR_DATA;
  } catch (const IoError& e) {
    last_error = e.what();
    return RFCOV_ERR_IO;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return RFCOV_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return RFCOV_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return RFCOV_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError(what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Json parse_optional(const char* text, const std::string& what) {
  if (text == nullptr || *text == '\0') return Json::object();
  return parse_json(text, what);
}

csv::Metadata metadata_from(const char* json) {
  csv::Metadata out;
  const Json j = parse_optional(json, "metadata");
  if (!j.is_object()) throw ConfigError("metadata must be a JSON object");
  for (const auto& item : j.items()) {
    out.emplace_back(item.key(), item.value().is_string() ? item.value().get<std::string>()
                                                          : item.value().dump());
  }
  return out;
}

OutcomeKind kind_from(const char* kind) {
  return kind == nullptr ? OutcomeKind::Continuous : parse_outcome_kind(kind);
}

}  // namespace

extern "C" {

const char* rfcov_version(void) { return "0.1.0"; }

const char* rfcov_last_error(void) { return last_error.c_str(); }

void rfcov_string_free(char* s) { delete[] s; }

rfcov_status rfcov_dataset_create(size_t n, size_t p, const double* x, const double* y,
                                  rfcov_dataset** out) {
  return guard([&] {
    require(out != nullptr && x != nullptr, "null argument");
    require(n > 0 && p > 0, "dataset must have at least one row and one column");
    auto d = std::make_unique<rfcov_dataset>();
    d->data.x = Matrix(n, p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        const double v = x[i * p + j];
        if (!std::isfinite(v)) throw DataError("non-finite covariate in row " + std::to_string(i + 1));
        d->data.x(i, j) = v;
      }
    }
    if (y != nullptr) {
      for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(y[i])) throw DataError("non-finite outcome in row " + std::to_string(i + 1));
      d->data.y.emplace(y, y + n);
    }
    *out = d.release();
  });
}

rfcov_status rfcov_dataset_read_csv(const char* path, int require_y, rfcov_dataset** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto d = std::make_unique<rfcov_dataset>();
    d->data = csv::read_dataset(path, require_y != 0);
    *out = d.release();
  });
}

rfcov_status rfcov_dataset_write_csv(const rfcov_dataset* data, const char* path,
                                     const char* metadata_json) {
  return guard([&] {
    require(data != nullptr && path != nullptr, "null argument");
    csv::write_text(path, csv::dataset_csv(data->data, metadata_from(metadata_json)));
  });
}

size_t rfcov_dataset_rows(const rfcov_dataset* data) { return data ? data->data.x.rows() : 0; }

size_t rfcov_dataset_cols(const rfcov_dataset* data) { return data ? data->data.x.cols() : 0; }

int rfcov_dataset_has_y(const rfcov_dataset* data) {
  return data != nullptr && data->data.y.has_value() ? 1 : 0;
}

rfcov_status rfcov_dataset_copy(const rfcov_dataset* data, double* x, double* y) {
  return guard([&] {
    require(data != nullptr, "null dataset");
    const auto& m = data->data.x;
    if (x != nullptr) {
      for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) x[i * m.cols() + j] = m(i, j);
      }
    }
    if (y != nullptr) {
      require(data->data.y.has_value(), "dataset has no y column");
      std::copy(data->data.y->begin(), data->data.y->end(), y);
    }
  });
}

void rfcov_dataset_free(rfcov_dataset* data) { delete data; }

rfcov_status rfcov_dgm_generate(size_t n, size_t p, const char* kind, uint64_t seed, size_t n_test,
                                double jitter_sd, rfcov_dataset** train, rfcov_dataset** test) {
  return guard([&] {
    require(train != nullptr, "null argument");
    require(n > 0, "n must be at least 1");
    const OutcomeKind k = kind_from(kind);
    const auto design = dgm::gen_predictors(n, p, derive_key(seed, "design"));
    const auto model = dgm::make_outcome_model(design, k);
    auto tr = std::make_unique<rfcov_dataset>();
    tr->data.x = design.observed();
    tr->data.y = dgm::draw_outcomes(design, model, derive_key(seed, "outcome"));
    std::unique_ptr<rfcov_dataset> te;
    if (test != nullptr && n_test > 0) {
      const auto points = dgm::make_test_points(design, n_test, jitter_sd, derive_key(seed, "points"));
      te = std::make_unique<rfcov_dataset>();
      te->data.x = points.leading_cols(design.schema.p_observed);
      te->data.y = dgm::true_mean(points, model);
    }
    *train = tr.release();
    if (test != nullptr) *test = te.release();
  });
}

rfcov_status rfcov_forest_fit(const rfcov_dataset* train, const char* kind, const char* config_json,
                              size_t threads, rfcov_forest** out) {
  return guard([&] {
    require(train != nullptr && out != nullptr, "null argument");
    if (!train->data.y) throw ConfigError("training data has no y column");
    forest::ForestConfig config;
    forest::from_json(parse_optional(config_json, "forest config"), config);
    const forest::TrainingFrame frame(train->data.x);
    auto f = std::make_unique<rfcov_forest>();
    f->forest = forest::fit_forest(frame, *train->data.y, config, kind_from(kind),
                                   threads == 0 ? 1 : threads);
    *out = f.release();
  });
}

rfcov_status rfcov_forest_save(const rfcov_forest* forest, const char* path) {
  return guard([&] {
    require(forest != nullptr && path != nullptr, "null argument");
    forest::save_forest(forest->forest, path);
  });
}

rfcov_status rfcov_forest_load(const char* path, rfcov_forest** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto f = std::make_unique<rfcov_forest>();
    f->forest = forest::load_forest(path);
    *out = f.release();
  });
}

size_t rfcov_forest_num_trees(const rfcov_forest* forest) {
  return forest ? forest->forest.size() : 0;
}

size_t rfcov_forest_num_features(const rfcov_forest* forest) {
  return forest ? forest->forest.num_features : 0;
}

const char* rfcov_forest_kind(const rfcov_forest* forest) {
  if (forest == nullptr) return "";
  return forest->forest.kind == OutcomeKind::Binary ? "binary" : "continuous";
}

rfcov_status rfcov_forest_config_json(const rfcov_forest* forest, char** out) {
  return guard([&] {
    require(forest != nullptr && out != nullptr, "null argument");
    *out = dup_string(Json(forest->forest.config).dump());
  });
}

rfcov_status rfcov_forest_predict(const rfcov_forest* forest, const rfcov_dataset* points,
                                  double* mean, double* tree_variance) {
  return guard([&] {
    require(forest != nullptr && points != nullptr, "null argument");
    const auto& f = forest->forest;
    if (points->data.x.cols() != f.num_features) {
      throw DataError("points have " + std::to_string(points->data.x.cols()) +
                      " columns, forest expects " + std::to_string(f.num_features));
    }
    const auto preds = forest::predict_forest(f, points->data.x);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (mean != nullptr) mean[i] = preds[i].mean;
      if (tree_variance != nullptr) {
        tree_variance[i] = preds[i].tree_variance.value_or(std::numeric_limits<double>::quiet_NaN());
      }
    }
  });
}

void rfcov_forest_free(rfcov_forest* forest) { delete forest; }

rfcov_status rfcov_uncertainty(const rfcov_forest* forest, const rfcov_dataset* train,
                               const rfcov_dataset* points, const char* kind,
                               const char* pasr_json, double alpha, size_t threads,
                               rfcov_report** out) {
  return guard([&] {
    require(forest != nullptr && train != nullptr && points != nullptr && out != nullptr,
            "null argument");
    const auto& f = forest->forest;
    if (kind != nullptr && parse_outcome_kind(kind) != f.kind) {
      throw ConfigError(std::string("outcome kind '") + kind + "' does not match the forest ('" +
                        std::string(to_string(f.kind)) + "')");
    }
    if (!train->data.y) throw ConfigError("training data has no y column");
    const auto& y = *train->data.y;
    if (train->data.x.rows() != f.num_train || train->data.x.cols() != f.num_features) {
      throw DataError("training data does not match the forest (" + std::to_string(f.num_train) +
                      " rows x " + std::to_string(f.num_features) + " columns expected)");
    }
    if (points->data.x.cols() != f.num_features) {
      throw DataError("test points do not have " + std::to_string(f.num_features) + " columns");
    }
    if (f.size() < 2) throw ConfigError("uncertainty needs a forest with at least 2 trees");
    if (f.kind == OutcomeKind::Binary) require_binary(y);
    (void)intervals::normal_quantile(alpha);

    pasr::PasrConfig pc;
    pasr::from_json(parse_optional(pasr_json, "pasr config"), pc);
    pc.threads = threads == 0 ? 1 : threads;
    const forest::TrainingFrame frame(train->data.x);
    const Matrix& pts = points->data.x;

    auto report = std::make_unique<rfcov_report>();
    std::vector<double> sigma2(pts.rows(), 0.0);
    pasr::NuisanceModel nm;
    if (f.kind == OutcomeKind::Continuous) {
      nm = pasr::fit_nuisance_continuous(frame, y, pc);
      sigma2 = nm.sigma2_at(pts);
    } else {
      nm = pasr::fit_nuisance_binary(frame, y, f.config, pc);
    }
    const auto est = pasr::estimate_floor(frame, nm, f.config, pts, pc);
    report->floor = est.floor;
    report->replicates = est.replicates;
    report->mc_trees = est.mc_trees;

    auto& r = report->report;
    r.kind = f.kind;
    r.alpha = alpha;
    r.num_trees = f.size();
    const auto preds = forest::predict_forest(f, pts, pc.threads);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double tv = *preds[i].tree_variance;
      r.entries.push_back(f.kind == OutcomeKind::Continuous
                              ? intervals::prediction_interval_continuous(
                                    preds[i].mean, sigma2[i], tv, f.size(), est.floor[i], alpha)
                              : intervals::confidence_interval_binary(preds[i].mean, tv, f.size(),
                                                                      est.floor[i], alpha));
    }
    *out = report.release();
  });
}

size_t rfcov_report_size(const rfcov_report* report) {
  return report ? report->report.entries.size() : 0;
}

rfcov_status rfcov_report_floor_info(const rfcov_report* report, size_t* replicates,
                                     size_t* mc_trees) {
  return guard([&] {
    require(report != nullptr, "null report");
    if (replicates != nullptr) *replicates = report->replicates;
    if (mc_trees != nullptr) *mc_trees = report->mc_trees;
  });
}

rfcov_status rfcov_report_entry(const rfcov_report* report, size_t i, rfcov_interval* out) {
  return guard([&] {
    require(report != nullptr && out != nullptr, "null argument");
    require(i < report->report.entries.size(), "entry index out of range");
    const auto& e = report->report.entries[i];
    *out = {e.estimate,    e.lower,  e.upper,     e.lower_clamped, e.upper_clamped, e.var_outcome,
            e.var_mc,      e.var_floor, e.floor_raw, e.var_total,  e.z,             e.alpha};
  });
}

rfcov_status rfcov_report_write_csv(const rfcov_report* report, const char* path,
                                    const char* metadata_json) {
  return guard([&] {
    require(report != nullptr && path != nullptr, "null argument");
    std::string text = csv::metadata_block(metadata_from(metadata_json));
    text += "test_id,estimate,lo,hi,lo_clamped,hi_clamped,var_outcome,var_mc,var_floor,alpha,var_total\n";
    const auto& entries = report->report.entries;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      text += std::to_string(i + 1);
      for (double v : {e.estimate, e.lower, e.upper, e.lower_clamped, e.upper_clamped, e.var_outcome,
                       e.var_mc, e.var_floor, e.alpha, e.var_total}) {
        text += ',' + csv::format_double(v);
      }
      text += '\n';
    }
    csv::write_text(path, text);
  });
}

rfcov_status rfcov_report_write_floor_csv(const rfcov_report* report, const char* path,
                                          const char* metadata_json) {
  return guard([&] {
    require(report != nullptr && path != nullptr, "null argument");
    std::string text = csv::metadata_block(metadata_from(metadata_json));
    text += "test_id,c_t_hat,c_t_hat_clamped,n_replicates,b_mc\n";
    for (std::size_t i = 0; i < report->floor.size(); ++i) {
      const double v = report->floor[i];
      text += std::to_string(i + 1) + ',' + csv::format_double(v) + ',' +
              csv::format_double(std::max(v, 0.0)) + ',' + std::to_string(report->replicates) +
              ',' + std::to_string(report->mc_trees) + '\n';
    }
    csv::write_text(path, text);
  });
}

void rfcov_report_free(rfcov_report* report) { delete report; }

rfcov_status rfcov_scenario_preset(const char* name, const char* kind, char** out) {
  return guard([&] {
    require(name != nullptr && out != nullptr, "null argument");
    *out = dup_string(Json(experiments::preset(name, kind_from(kind))).dump(2));
  });
}

const char* rfcov_experiment_names(void) {
  static const std::string names = [] {
    std::string out;
    for (const auto& n : experiments::experiment_names()) out += (out.empty() ? "" : ",") + n;
    return out;
  }();
  return names.c_str();
}

rfcov_status rfcov_experiment_run(const char* name, const char* scenario_json,
                                  const char* metadata_json, rfcov_experiment** out) {
  return guard([&] {
    require(name != nullptr && out != nullptr, "null argument");
    const Json j = parse_optional(scenario_json, "scenario");
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    const std::string preset_name = j.value("name", std::string("favorable"));
    const OutcomeKind kind = parse_outcome_kind(j.value("kind", std::string("continuous")));
    const auto names = experiments::preset_names();
    const bool known = std::find(names.begin(), names.end(), preset_name) != names.end();
    experiments::Scenario scenario = experiments::preset(known ? preset_name : "favorable", kind);
    experiments::from_json(j, scenario);
    const auto result = experiments::run_experiment(name, scenario);
    auto e = std::make_unique<rfcov_experiment>();
    e->csv = experiments::tidy_csv(result, metadata_from(metadata_json));
    e->summary = result.summary.dump(2);
    e->passed = result.passed();
    *out = e.release();
  });
}

const char* rfcov_experiment_csv(const rfcov_experiment* exp) { return exp ? exp->csv.c_str() : ""; }

const char* rfcov_experiment_summary(const rfcov_experiment* exp) {
  return exp ? exp->summary.c_str() : "";
}

int rfcov_experiment_passed(const rfcov_experiment* exp) { return exp && exp->passed ? 1 : 0; }

void rfcov_experiment_free(rfcov_experiment* exp) { delete exp; }

}  // extern "C"
