#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "codetune/bench.hpp"
#include "oracles.hpp"

using namespace codetune;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

BenchmarkMatrix smoke_matrix() {
  BenchmarkMatrix m;
  m.function_ids = {6};
  m.methods = {Method::kAnls, Method::kMaxMin};
  m.models = {GPModel::kCommonTheta};
  m.maxmin.max_iterations = 3;
  m.calibrate.fit.multistart = 3;
  m.calibrate.tau_multistart = 3;
  m.n_c = 12;
  m.n_e = 10;
  return m;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("test function values at pinned points") {
  CHECK(eval_test_function(1, vec2(2, 2), Eigen::VectorXd::Zero(3)) ==
        doctest::Approx(2.0 * std::exp(2.0)).epsilon(1e-12));  // 14.7781121978613
  CHECK(eval_test_function(6, vec2(4, 4), Eigen::VectorXd::Ones(2)) == 8.0);

  // Two independently written forms of the rational test function agree.
  Eigen::VectorXd tau7(3);
  tau7 << 2.0, 1.0, 3.0;
  Eigen::VectorXd x7(2);
  x7 << 0.5, 0.5;
  const double got = eval_test_function(7, tau7, x7);
  const double x1 = 0.5, x2 = 0.5, t1 = 2.0, t2 = 1.0, t3 = 3.0;
  const double num = 100.0 * t1 * std::pow(x1, 3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
  const double den = 100.0 * t2 * std::pow(x1, 3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
  const double term1 = -std::expm1(-1.0 / (2.0 * x2)) * num / den;
  const double term2 = 5.0 * std::exp(-t1) * std::pow(x1, t3 / 10.0) /
                       (100.0 * (std::pow(x2, 2.0 + t3 / 10.0) + 1.0));
  CHECK(got == doctest::Approx(term1 + term2).epsilon(1e-12));
}

TEST_CASE("registry is complete and rejects unknown ids") {
  for (int id = 1; id <= 7; ++id) {
    const TestFunction& f = test_function(id);
    CHECK(f.tau_star.size() == f.q);
    CHECK(f.t_ranges.rows() == f.q);
    CHECK(f.x_ranges.rows() == f.p);
    CHECK((f.default_n_c == 30) == (id <= 5));
  }
  CHECK_THROWS(test_function(0));
  CHECK_THROWS(test_function(8));
  CHECK_THROWS(eval_test_function(99, Eigen::VectorXd(), Eigen::VectorXd()));
}

TEST_CASE("domain violations are rejected") {
  Eigen::VectorXd x(4);
  x << 0.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(eval_test_function(2, Eigen::VectorXd::Ones(3), x), std::domain_error);
}

TEST_CASE("bias terms are zero for the exact functions and match the formulas for 6 and 7") {
  RngStream rng(3, 0);
  for (int id = 1; id <= 5; ++id)
    CHECK(test_function_bias(id, Eigen::VectorXd::Constant(test_function(id).p, 0.3)) == 0.0);
  const double x2 = 0.7;
  CHECK(test_function_bias(6, vec2(0.1, x2)) ==
        doctest::Approx(x2 * std::sin(5.0 * x2)).epsilon(1e-14));
  CHECK(test_function_bias(7, vec2(0.5, 0.25)) ==
        doctest::Approx((10.0 * 0.25 + 4.0 * 0.0625) / (50.0 * 0.125 + 10.0)).epsilon(1e-14));
}

TEST_CASE("noiseless biasless generation reproduces the function at tau_star") {
  const CalibrationDataset data = generate_toy_data(3, 10, 6, 7, {0.0, false});
  const TestFunction& f = test_function(3);
  for (int i = 0; i < 6; ++i)
    CHECK(data.exp().responses()[i] ==
          doctest::Approx(eval_test_function(3, f.tau_star,
                                             data.exp().x_inputs().row(i).transpose()))
              .epsilon(1e-14));
  // Computer responses are always noiseless.
  for (int i = 0; i < 10; ++i)
    CHECK(data.comp().responses()[i] ==
          doctest::Approx(eval_test_function(3, data.comp().t_inputs().row(i).transpose(),
                                             data.comp().x_inputs().row(i).transpose()))
              .epsilon(1e-14));
}

TEST_CASE("default sizes follow the per-function settings") {
  const CalibrationDataset d1 =
      generate_toy_data(1, test_function(1).default_n_c, test_function(1).default_n_e, 1);
  CHECK(d1.comp().n() == 30);
  CHECK(d1.exp().n() == 30);
  const CalibrationDataset d6 =
      generate_toy_data(6, test_function(6).default_n_c, test_function(6).default_n_e, 1);
  CHECK(d6.comp().n() == 20);
  CHECK(d6.exp().n() == 20);
}

TEST_CASE("generation is seed-deterministic and draws stay inside the ranges") {
  const CalibrationDataset a = generate_toy_data(2, 14, 9, 123);
  const CalibrationDataset b = generate_toy_data(2, 14, 9, 123);
  CHECK(dataset_hash(a) == dataset_hash(b));
  const TestFunction& f = test_function(2);
  for (Eigen::Index j = 0; j < f.q; ++j) {
    CHECK(a.comp().t_inputs().col(j).minCoeff() >= f.t_ranges(j, 0));
    CHECK(a.comp().t_inputs().col(j).maxCoeff() < f.t_ranges(j, 1));
  }
  for (Eigen::Index j = 0; j < f.p; ++j) {
    CHECK(a.exp().x_inputs().col(j).minCoeff() >= f.x_ranges(j, 0));
    CHECK(a.exp().x_inputs().col(j).maxCoeff() < f.x_ranges(j, 1));
  }
  CHECK_THROWS(generate_toy_data(1, 0, 5, 1));
}

TEST_CASE("distance is the euclidean norm of the difference") {
  CHECK(distance(vec2(2, 2), vec2(2, 2)) == 0.0);
  CHECK(distance(vec2(3, 2), vec2(2, 2)) == 1.0);
  Eigen::VectorXd a(3), b(3);
  a << 1.801, 1.349, 3.001;
  b << 2.0, 1.0, 3.0;
  CHECK(distance(a, b) == doctest::Approx(0.4018).epsilon(1e-3));
  CHECK_THROWS(distance(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)));
}

TEST_CASE("single-cell single-rep report has zero spread") {
  BenchmarkMatrix m = smoke_matrix();
  m.methods = {Method::kAnls};
  const BenchmarkReport r = run_benchmark(m, 1, 99);
  REQUIRE(r.summaries.size() == 1);
  CHECK(r.summaries[0].repetitions == 1);
  CHECK(r.summaries[0].dist_sd == 0.0);
  CHECK(r.summaries[0].tau_sd.maxCoeff() == 0.0);
  CHECK(r.records.size() == 1);
}

TEST_CASE("benchmark is deterministic across runs and thread counts") {
  const BenchmarkMatrix m = smoke_matrix();
  const BenchmarkReport a = run_benchmark(m, 2, 5, 1);
  const BenchmarkReport b = run_benchmark(m, 2, 5, 2);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].rss_p == b.records[i].rss_p);
    CHECK((a.records[i].tau_hat.array() == b.records[i].tau_hat.array()).all());
    CHECK(a.records[i].data_hash == b.records[i].data_hash);
  }
}

TEST_CASE("methods within one repetition consume the identical dataset") {
  const BenchmarkReport r = run_benchmark(smoke_matrix(), 2, 17, 2);
  std::map<int, std::uint64_t> hash_by_rep;
  for (const BenchmarkRecord& rec : r.records) {
    REQUIRE(!rec.failed);
    auto [it, inserted] = hash_by_rep.try_emplace(rec.repetition, rec.data_hash);
    if (!inserted) CHECK(it->second == rec.data_hash);
  }
}

TEST_CASE("mse decomposition is recomputable from the raw records") {
  const BenchmarkReport r = run_benchmark(smoke_matrix(), 3, 21);
  for (std::size_t c = 0; c < r.summaries.size(); ++c) {
    const CellSummary& s = r.summaries[c];
    const Eigen::VectorXd tau_star = test_function(s.cell.function_id).tau_star;
    REQUIRE(s.repetitions == r.repetitions);  // no failures expected here
    double dist_sum = 0.0;
    Eigen::MatrixXd taus(s.repetitions, tau_star.size());
    int row = 0;
    for (int rep = 0; rep < r.repetitions; ++rep) {
      const BenchmarkRecord& rec = r.records[c * r.repetitions + rep];
      dist_sum += rec.dist;
      taus.row(row++) = rec.tau_hat.transpose();
    }
    const double dist_mean = dist_sum / s.repetitions;
    double var_sum = 0.0;
    for (Eigen::Index j = 0; j < taus.cols(); ++j) {
      const double mu = taus.col(j).mean();
      var_sum += (taus.col(j).array() - mu).square().sum() / (s.repetitions - 1);
    }
    CHECK(std::fabs(s.mse - (dist_mean * dist_mean + var_sum)) < 1e-10);
  }
}

TEST_CASE("relative improvement entries pair maxmin with its anls cell") {
  const BenchmarkReport r = run_benchmark(smoke_matrix(), 2, 31);
  REQUIRE(r.improvements.size() == 1);
  const ImprovementEntry& e = r.improvements[0];
  CHECK(e.function_id == 6);
  CHECK(e.ri_percent ==
        doctest::Approx(100.0 * (e.anls_mean - e.maxmin_mean) / e.anls_mean).epsilon(1e-12));
}

TEST_CASE("invalid function ids fail before any run starts") {
  BenchmarkMatrix m = smoke_matrix();
  m.function_ids = {42};
  CHECK_THROWS(run_benchmark(m, 1, 1));
  m.function_ids = {};
  CHECK_THROWS(run_benchmark(m, 1, 1));
}

TEST_CASE("exact-model sanity: dense noiseless anls gets close to tau_star") {
  // With the surrogate trained on a dense design and noise switched off the
  // estimate should land near the generating value.
  BenchmarkMatrix m;
  m.function_ids = {6};
  m.methods = {Method::kAnls};
  m.models = {GPModel::kSeparableTheta};
  m.calibrate.fit.multistart = 4;
  m.calibrate.tau_multistart = 6;
  m.n_c = 60;
  m.n_e = 15;
  const CalibrationDataset data = generate_toy_data(6, 60, 15, 3, {0.0, false});
  const TuningEstimate est = anls(data, GPModel::kSeparableTheta, m.calibrate);
  CHECK(distance(est.tau_hat, test_function(6).tau_star) < 0.15);
}

}  // TEST_SUITE
