#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rfcov/rfcov.h"

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("rfcov_capi_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// y = x1 plus a little structure; rows spread on a grid.
rfcov_dataset* toy(std::size_t n, bool binary = false) {
  std::vector<double> x(n * 2), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[2 * i] = double(i % 17) / 17.0;
    x[2 * i + 1] = double((i * 7) % 11) / 11.0;
    y[i] = binary ? double((i * 5) % 3 == 0) : x[2 * i] + 0.3 * double((i * 13) % 5);
  }
  rfcov_dataset* d = nullptr;
  REQUIRE(rfcov_dataset_create(n, 2, x.data(), y.data(), &d) == RFCOV_OK);
  return d;
}

}  // namespace

TEST_CASE("dataset handles") {
  const double x[] = {1, 2, 3, 4, 5, 6};
  const double y[] = {0.5, -0.5, 1.5};
  rfcov_dataset* d = nullptr;
  REQUIRE(rfcov_dataset_create(3, 2, x, y, &d) == RFCOV_OK);
  CHECK(rfcov_dataset_rows(d) == 3);
  CHECK(rfcov_dataset_cols(d) == 2);
  CHECK(rfcov_dataset_has_y(d) == 1);
  double xb[6], yb[3];
  REQUIRE(rfcov_dataset_copy(d, xb, yb) == RFCOV_OK);
  for (int i = 0; i < 6; ++i) CHECK(xb[i] == x[i]);
  for (int i = 0; i < 3; ++i) CHECK(yb[i] == y[i]);

  const auto path = temp_path("data.csv");
  REQUIRE(rfcov_dataset_write_csv(d, path.c_str(), R"({"seed": 3})") == RFCOV_OK);
  CHECK(slurp(path).rfind("# seed: 3\nx1,x2,y\n", 0) == 0);
  rfcov_dataset* back = nullptr;
  REQUIRE(rfcov_dataset_read_csv(path.c_str(), 1, &back) == RFCOV_OK);
  double xc[6], yc[3];
  REQUIRE(rfcov_dataset_copy(back, xc, yc) == RFCOV_OK);
  for (int i = 0; i < 6; ++i) CHECK(xc[i] == x[i]);
  for (int i = 0; i < 3; ++i) CHECK(yc[i] == y[i]);
  rfcov_dataset_free(back);
  rfcov_dataset_free(d);
  std::remove(path.c_str());

  rfcov_dataset* no_y = nullptr;
  REQUIRE(rfcov_dataset_create(3, 2, x, nullptr, &no_y) == RFCOV_OK);
  CHECK(rfcov_dataset_has_y(no_y) == 0);
  rfcov_dataset_free(no_y);
}

TEST_CASE("errors carry a status and a message") {
  rfcov_dataset* d = nullptr;
  CHECK(rfcov_dataset_create(3, 2, nullptr, nullptr, &d) == RFCOV_ERR_ARGUMENT);
  CHECK(std::string(rfcov_last_error()).size() > 0);
  CHECK(rfcov_dataset_read_csv(temp_path("missing.csv").c_str(), 1, &d) == RFCOV_ERR_IO);
  const double bad[] = {1.0, NAN};
  CHECK(rfcov_dataset_create(1, 2, bad, nullptr, &d) == RFCOV_ERR_DATA);

  auto* t = toy(40);
  rfcov_forest* f = nullptr;
  CHECK(rfcov_forest_fit(t, "continuous", R"({"num_trees": 0})", 1, &f) == RFCOV_ERR_CONFIG);
  CHECK(rfcov_forest_fit(t, "continuous", R"({"bogus": 1})", 1, &f) == RFCOV_ERR_CONFIG);
  CHECK(rfcov_forest_fit(t, "continuous", "{", 1, &f) == RFCOV_ERR_CONFIG);
  CHECK(rfcov_forest_fit(t, "ordinal", nullptr, 1, &f) == RFCOV_ERR_CONFIG);
  CHECK(rfcov_forest_fit(t, "binary", nullptr, 1, &f) == RFCOV_ERR_DATA);
  CHECK(f == nullptr);
  rfcov_dataset_free(t);
}

TEST_CASE("forest fit, predict and persistence") {
  auto* t = toy(80);
  rfcov_forest* f = nullptr;
  REQUIRE(rfcov_forest_fit(t, "continuous", R"({"num_trees": 25, "candidates": 1, "seed": 4})", 2,
                           &f) == RFCOV_OK);
  CHECK(rfcov_forest_num_trees(f) == 25);
  CHECK(rfcov_forest_num_features(f) == 2);
  CHECK(std::string(rfcov_forest_kind(f)) == "continuous");
  char* cfg = nullptr;
  REQUIRE(rfcov_forest_config_json(f, &cfg) == RFCOV_OK);
  CHECK(std::string(cfg).find("\"num_trees\":25") != std::string::npos);
  rfcov_string_free(cfg);

  std::vector<double> mean(80), var(80);
  REQUIRE(rfcov_forest_predict(f, t, mean.data(), var.data()) == RFCOV_OK);
  for (std::size_t i = 0; i < 80; ++i) {
    CHECK(std::isfinite(mean[i]));
    CHECK(var[i] >= 0.0);
  }

  const auto path = temp_path("forest.json");
  REQUIRE(rfcov_forest_save(f, path.c_str()) == RFCOV_OK);
  rfcov_forest* g = nullptr;
  REQUIRE(rfcov_forest_load(path.c_str(), &g) == RFCOV_OK);
  std::vector<double> mean2(80), var2(80);
  REQUIRE(rfcov_forest_predict(g, t, mean2.data(), var2.data()) == RFCOV_OK);
  CHECK(mean == mean2);
  CHECK(var == var2);
  std::remove(path.c_str());

  // Same seed, different thread count: same predictions.
  rfcov_forest* h = nullptr;
  REQUIRE(rfcov_forest_fit(t, "continuous", R"({"num_trees": 25, "candidates": 1, "seed": 4})", 1,
                           &h) == RFCOV_OK);
  std::vector<double> mean3(80);
  REQUIRE(rfcov_forest_predict(h, t, mean3.data(), nullptr) == RFCOV_OK);
  CHECK(mean == mean3);

  rfcov_forest* one = nullptr;
  REQUIRE(rfcov_forest_fit(t, "continuous", R"({"num_trees": 1})", 1, &one) == RFCOV_OK);
  REQUIRE(rfcov_forest_predict(one, t, mean.data(), var.data()) == RFCOV_OK);
  CHECK(std::isnan(var[0]));

  const double narrow[] = {0.5};
  rfcov_dataset* pts = nullptr;
  REQUIRE(rfcov_dataset_create(1, 1, narrow, nullptr, &pts) == RFCOV_OK);
  CHECK(rfcov_forest_predict(f, pts, mean.data(), nullptr) == RFCOV_ERR_DATA);

  rfcov_dataset_free(pts);
  rfcov_forest_free(one);
  rfcov_forest_free(h);
  rfcov_forest_free(g);
  rfcov_forest_free(f);
  rfcov_dataset_free(t);
}

TEST_CASE("uncertainty report") {
  auto* t = toy(60);
  rfcov_forest* f = nullptr;
  REQUIRE(rfcov_forest_fit(t, "continuous", R"({"num_trees": 30, "candidates": 1})", 1, &f) ==
          RFCOV_OK);
  const char* pasr = R"({"replicates": 6, "mc_trees": 10, "crossfit_reps": 1, "variance_trees": 20})";
  rfcov_report* r = nullptr;
  REQUIRE(rfcov_uncertainty(f, t, t, nullptr, pasr, 0.05, 2, &r) == RFCOV_OK);
  REQUIRE(rfcov_report_size(r) == 60);
  std::size_t reps = 0, trees = 0;
  REQUIRE(rfcov_report_floor_info(r, &reps, &trees) == RFCOV_OK);
  CHECK(reps == 6);
  CHECK(trees == 10);
  for (std::size_t i = 0; i < 60; ++i) {
    rfcov_interval e{};
    REQUIRE(rfcov_report_entry(r, i, &e) == RFCOV_OK);
    CHECK(e.alpha == 0.05);
    CHECK(e.var_total == doctest::Approx(e.var_outcome + e.var_mc + e.var_floor).epsilon(1e-12));
    CHECK(e.var_floor >= 0.0);
    CHECK(e.var_floor == std::max(e.floor_raw, 0.0));
    CHECK(e.lower <= e.estimate);
    CHECK(e.upper >= e.estimate);
    CHECK(e.upper - e.estimate == doctest::Approx(e.z * std::sqrt(e.var_total)));
  }
  rfcov_interval e{};
  CHECK(rfcov_report_entry(r, 60, &e) == RFCOV_ERR_ARGUMENT);

  const auto ipath = temp_path("intervals.csv"), fpath = temp_path("floor.csv");
  REQUIRE(rfcov_report_write_csv(r, ipath.c_str(), R"({"alpha": 0.05})") == RFCOV_OK);
  REQUIRE(rfcov_report_write_floor_csv(r, fpath.c_str(), nullptr) == RFCOV_OK);
  const auto text = slurp(ipath);
  CHECK(text.find("# alpha: 0.05\n") != std::string::npos);
  CHECK(text.find("test_id,estimate,lo,hi,lo_clamped,hi_clamped,var_outcome,var_mc,var_floor,alpha,"
                  "var_total\n") != std::string::npos);
  CHECK(slurp(fpath).find("test_id,c_t_hat,c_t_hat_clamped,n_replicates,b_mc\n") != std::string::npos);
  std::remove(ipath.c_str());
  std::remove(fpath.c_str());

  rfcov_report* again = nullptr;
  REQUIRE(rfcov_uncertainty(f, t, t, "continuous", pasr, 0.05, 1, &again) == RFCOV_OK);
  for (std::size_t i = 0; i < 60; ++i) {
    rfcov_interval a{}, b{};
    rfcov_report_entry(r, i, &a);
    rfcov_report_entry(again, i, &b);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
  }

  rfcov_report* bad = nullptr;
  CHECK(rfcov_uncertainty(f, t, t, "binary", pasr, 0.05, 1, &bad) == RFCOV_ERR_CONFIG);
  CHECK(rfcov_uncertainty(f, t, t, nullptr, pasr, 1.5, 1, &bad) == RFCOV_ERR_CONFIG);
  CHECK(rfcov_uncertainty(f, t, t, nullptr, R"({"replicates": 1})", 0.05, 1, &bad) ==
        RFCOV_ERR_CONFIG);
  CHECK(bad == nullptr);

  rfcov_report_free(again);
  rfcov_report_free(r);
  rfcov_forest_free(f);
  rfcov_dataset_free(t);
}

TEST_CASE("binary uncertainty clamps to the unit interval") {
  auto* t = toy(60, true);
  rfcov_forest* f = nullptr;
  REQUIRE(rfcov_forest_fit(t, "binary", R"({"num_trees": 30, "candidates": 1, "min_leaf": 2})", 1,
                           &f) == RFCOV_OK);
  CHECK(std::string(rfcov_forest_kind(f)) == "binary");
  rfcov_report* r = nullptr;
  REQUIRE(rfcov_uncertainty(f, t, t, nullptr, R"({"replicates": 5, "mc_trees": 8})", 0.1, 1, &r) ==
          RFCOV_OK);
  for (std::size_t i = 0; i < rfcov_report_size(r); ++i) {
    rfcov_interval e{};
    REQUIRE(rfcov_report_entry(r, i, &e) == RFCOV_OK);
    CHECK(e.var_outcome == 0.0);
    CHECK(e.lower_clamped >= 0.0);
    CHECK(e.upper_clamped <= 1.0);
  }
  rfcov_report_free(r);

  // Training labels outside {0, 1} are a data error.
  std::vector<double> x(20), y(20, 0.0);
  for (std::size_t i = 0; i < 20; ++i) x[i] = double(i);
  y[3] = 2.0;
  rfcov_dataset* odd = nullptr;
  REQUIRE(rfcov_dataset_create(20, 1, x.data(), y.data(), &odd) == RFCOV_OK);
  rfcov_forest* g = nullptr;
  CHECK(rfcov_forest_fit(odd, "binary", nullptr, 1, &g) == RFCOV_ERR_DATA);
  rfcov_dataset_free(odd);
  rfcov_forest_free(f);
  rfcov_dataset_free(t);
}

TEST_CASE("simulated data") {
  rfcov_dataset *train = nullptr, *test = nullptr;
  REQUIRE(rfcov_dgm_generate(120, 10, "binary", 9, 15, 0.02, &train, &test) == RFCOV_OK);
  CHECK(rfcov_dataset_rows(train) == 120);
  CHECK(rfcov_dataset_cols(train) == 10);
  CHECK(rfcov_dataset_rows(test) == 15);
  std::vector<double> y(120), p(15);
  REQUIRE(rfcov_dataset_copy(train, nullptr, y.data()) == RFCOV_OK);
  for (double v : y) CHECK((v == 0.0 || v == 1.0));
  REQUIRE(rfcov_dataset_copy(test, nullptr, p.data()) == RFCOV_OK);
  for (double v : p) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  rfcov_dataset_free(train);
  rfcov_dataset_free(test);
  CHECK(rfcov_dgm_generate(120, 11, "continuous", 9, 15, 0.02, &train, &test) == RFCOV_ERR_CONFIG);
}

TEST_CASE("experiments through the C interface") {
  CHECK(std::string(rfcov_experiment_names()).find("overlap") != std::string::npos);
  char* preset = nullptr;
  REQUIRE(rfcov_scenario_preset("challenging", "binary", &preset) == RFCOV_OK);
  const std::string text = preset;
  rfcov_string_free(preset);
  CHECK(text.find("\"p\": 30") != std::string::npos);
  CHECK(text.find("\"kind\": \"binary\"") != std::string::npos);
  CHECK(rfcov_scenario_preset("gentle", nullptr, &preset) == RFCOV_ERR_CONFIG);

  rfcov_experiment* e = nullptr;
  REQUIRE(rfcov_experiment_run("overlap", R"({"overlap_trials": 2000})", R"({"seed": 1})", &e) ==
          RFCOV_OK);
  CHECK(std::string(rfcov_experiment_csv(e)).rfind("# seed: 1\n", 0) == 0);
  CHECK(std::string(rfcov_experiment_summary(e)).find("overlap") != std::string::npos);
  CHECK(rfcov_experiment_passed(e) == 1);
  rfcov_experiment_free(e);
  CHECK(rfcov_experiment_run("nonsense", nullptr, nullptr, &e) == RFCOV_ERR_CONFIG);
  CHECK(rfcov_experiment_run("overlap", R"({"n": -3})", nullptr, &e) == RFCOV_ERR_CONFIG);
}
