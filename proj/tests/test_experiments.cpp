#include <doctest.h>

#include <cmath>

#include "rfcov/error.hpp"
#include "rfcov/experiments.hpp"
#include "rfcov/json_io.hpp"

using namespace rfcov;
using namespace rfcov::experiments;

namespace {

Scenario tiny(OutcomeKind kind = OutcomeKind::Continuous) {
  Scenario s = preset("favorable", kind);
  s.n = 60;
  s.n_test = 6;
  s.forest.num_trees = 20;
  s.pasr.replicates = 4;
  s.pasr.mc_trees = 10;
  s.pasr.crossfit_reps = 1;
  s.pasr.variance_trees = 20;
  s.coverage_reps = 2;
  s.oracle_reps = 10;
  s.oracle_trees = 20;
  s.datasets = 2;
  s.b_grid = {1, 2, 10};
  s.inbag_reps = 4;
  s.inner_reps = 4;
  s.overlap_trials = 1000;
  s.alignment_trees = 10;
  return s;
}

}  // namespace

TEST_CASE("presets match the standard scenarios") {
  const auto fav = preset("favorable");
  CHECK(fav.n == 400);
  CHECK(fav.p == 10);
  CHECK(fav.forest.candidates == 4);
  CHECK(fav.forest.sampling == forest::Sampling::Bootstrap);
  const auto ch = preset("challenging");
  CHECK(ch.n == 200);
  CHECK(ch.p == 30);
  CHECK(ch.forest.candidates == 6);
  const auto st = preset("stress");
  CHECK(st.n == 200);
  CHECK(st.p == 200);
  CHECK(st.forest.candidates == 15);
  CHECK(preset("favorable", OutcomeKind::Binary).kind == OutcomeKind::Binary);
  CHECK_THROWS_AS(preset("gentle"), ConfigError);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
}

TEST_CASE("scenario JSON round trip") {
  auto s = preset("challenging", OutcomeKind::Binary);
  s.seed = 1234567890123ULL;
  s.jitter_sd = 0.1;
  s.b_grid = {1, 3, 9};
  s.forest.max_depth = 7;
  const Json j = s;
  Scenario back;
  from_json(j, back);
  CHECK(Json(back).dump() == j.dump());
  Scenario partial = preset("favorable");
  from_json(Json::parse(R"({"n": 123})"), partial);
  CHECK(partial.n == 123);
  CHECK(partial.p == 10);
  CHECK_THROWS_AS(from_json(Json::parse(R"({"nn": 1})"), partial), ConfigError);
  CHECK_THROWS_AS(from_json(Json::parse(R"({"n": "many"})"), partial), ConfigError);
}

TEST_CASE("candidate overlap") {
  const auto full = candidate_overlap_sim(10, 10, 500, 1);
  CHECK(full.mean == 10.0);
  CHECK(full.se == 0.0);
  for (std::size_t q : {1u, 4u}) {
    const auto r = candidate_overlap_sim(10, q, 100000, derive_key(2, q));
    CHECK(r.expected == doctest::Approx(double(q * q) / 10.0));
    CHECK(std::abs(r.mean - r.expected) <= 3 * r.se);
  }
  CHECK_THROWS_AS(candidate_overlap_sim(10, 11, 10, 1), ConfigError);
}

TEST_CASE("noise-free outcomes have no covariance floor") {
  // The common-seed form is exactly zero. The paired form draws fresh tree
  // seeds for each replication, so it is zero only up to its own MC noise.
  auto s = tiny();
  auto inst = make_instance(s);
  for (auto& v : inst.law.scale) v = 0.0;
  const auto oracle = oracle_true_ct(inst, s.forest, 5, 10, 3);
  for (std::size_t i = 0; i < inst.points.rows(); ++i) {
    CHECK(std::abs(oracle.variance_form[i].value) < 1e-24);
    CHECK(std::abs(oracle.paired_form[i].value) <= 4 * oracle.paired_form[i].se);
  }
  const auto rows = alignment_probe(inst, s.forest, {1, 4}, 5, 3);
  for (const auto& r : rows) CHECK(std::abs(r.covariance) <= 4 * r.se);
}

TEST_CASE("full subsample leaves no between-draw variance") {
  auto s = tiny();
  s.forest.sampling = forest::Sampling::Subsample;
  s.forest.sample_fraction = 1.0;
  const auto inst = make_instance(s);
  const auto d = single_tree_variance_decomposition(inst, s.forest, 6, 6, 4);
  CHECK(std::abs(d.v_out.value) <= 3 * d.v_out.se + 1e-12);
  CHECK(d.sum.value == doctest::Approx(d.v_in.value + d.v_out.value));
}

TEST_CASE("zero-width intervals never cover a continuous target") {
  auto s = tiny();
  s.alpha = 1.0;
  const auto inst = make_instance(s);
  const auto cov = coverage_study(s, inst);
  CHECK(cov.coverage == 0.0);
}

TEST_CASE("experiment dispatch") {
  auto s = tiny();
  const auto out = run_experiment("overlap", s);
  CHECK(out.experiment == "overlap");
  CHECK(!out.checks.empty());
  CHECK(out.passed());
  const auto csv = tidy_csv(out, {{"seed", "1"}});
  CHECK(csv.rfind("# seed: 1\n", 0) == 0);
  CHECK(csv.find("experiment,scenario,n,p,kind,q,sampling,min_leaf,metric,point,key,value") !=
        std::string::npos);
  CHECK_THROWS_AS(run_experiment("nonsense", s), ConfigError);
  CHECK(experiment_names().size() == 7);
}

TEST_CASE("experiments are deterministic in the seed and thread count") {
  auto s = tiny();
  const auto a = run_experiment("variance-vs-b", s);
  s.threads = 3;
  const auto b = run_experiment("variance-vs-b", s);
  CHECK(tidy_csv(a, {}) == tidy_csv(b, {}));
}
