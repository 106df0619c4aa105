#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "codetune/bench.hpp"
#include "codetune/calibrate.hpp"
#include "codetune/stats.hpp"
#include "oracles.hpp"

using namespace codetune;

namespace {

// Lean options so the unit suite stays fast; accuracy-sensitive settings are
// exercised in the acceptance suite.
CalibrateOptions quick_opts() {
  CalibrateOptions o;
  o.fit.multistart = 4;
  o.tau_multistart = 4;
  return o;
}

}  // namespace

TEST_SUITE("calibrate") {

TEST_CASE("rss_p is zero when the responses equal the predictions") {
  const CalibrationDataset data = generate_toy_data(6, 15, 8, 5);
  const FittedGP gp = fit_mle(data, GPModel::kCommonTheta, TrainingSet::kComputerOnly);
  const Eigen::VectorXd tau0 = Eigen::VectorXd::Constant(2, 3.0);
  const Eigen::VectorXd pred =
      gp.predict(assemble_experimental_inputs(data.exp(), tau0), Predictor::kComputer);
  const ExperimentalData synthetic(data.exp().x_inputs(), pred);
  CHECK(rss_p(tau0, gp, Predictor::kComputer, synthetic) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("identity bias constants reproduce the plain objective") {
  const CalibrationDataset data = generate_toy_data(6, 15, 8, 6);
  const FittedGP gp = fit_mle(data, GPModel::kCommonTheta, TrainingSet::kComputerOnly);
  const Eigen::VectorXd tau = Eigen::VectorXd::Constant(2, 4.0);
  CHECK(rss_p(tau, gp, Predictor::kComputer, data.exp(), BiasConstants{1.0, 0.0}) ==
        rss_p(tau, gp, Predictor::kComputer, data.exp()));
}

TEST_CASE("rss_p equals a hand-summed three-term residual") {
  const CalibrationDataset data = generate_toy_data(6, 12, 3, 7);
  const FittedGP gp = fit_mle(data, GPModel::kCommonTheta, TrainingSet::kComputerOnly);
  const Eigen::VectorXd tau = Eigen::VectorXd::Constant(2, 2.5);
  double hand = 0.0;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd x0(4);
    x0 << tau[0], tau[1], data.exp().x_inputs()(i, 0), data.exp().x_inputs()(i, 1);
    const double r = data.exp().responses()[i] - gp.predict(x0, Predictor::kComputer);
    hand += r * r;
  }
  CHECK(rss_p(tau, gp, Predictor::kComputer, data.exp()) ==
        doctest::Approx(hand).epsilon(1e-10));
}

TEST_CASE("anls on exact-surrogate data dominates the generating tau") {
  // Experimental responses generated from the surrogate itself: the minimizer
  // cannot do worse than the generator.
  const CalibrationDataset raw = generate_toy_data(6, 20, 10, 9, {0.0, false});
  const FittedGP gp = fit_mle(raw, GPModel::kCommonTheta, TrainingSet::kComputerOnly);
  const Eigen::VectorXd tau_star = test_function(6).tau_star;
  const Eigen::VectorXd pred =
      gp.predict(assemble_experimental_inputs(raw.exp(), tau_star), Predictor::kComputer);
  const CalibrationDataset data(raw.comp(), ExperimentalData(raw.exp().x_inputs(), pred));
  const TuningEstimate est = anls(data, GPModel::kCommonTheta, quick_opts());
  CHECK(est.rss_p <= rss_p(tau_star, *est.fitted, Predictor::kComputer, data.exp()) + 1e-12);
  CHECK(est.trace.size() == 1);
  CHECK(est.method == Method::kAnls);
}

TEST_CASE("anls is invariant to experimental-row permutation") {
  const CalibrationDataset data = generate_toy_data(6, 15, 9, 12);
  Eigen::VectorXi perm(9);
  perm << 4, 7, 0, 8, 2, 6, 1, 5, 3;
  Eigen::MatrixXd xp(9, 2);
  Eigen::VectorXd yp(9);
  for (int i = 0; i < 9; ++i) {
    xp.row(i) = data.exp().x_inputs().row(perm[i]);
    yp[i] = data.exp().responses()[perm[i]];
  }
  const CalibrationDataset permuted(data.comp(), ExperimentalData(xp, yp));
  const TuningEstimate a = anls(data, GPModel::kCommonTheta, quick_opts());
  const TuningEstimate b = anls(permuted, GPModel::kCommonTheta, quick_opts());
  CHECK(a.rss_p == doctest::Approx(b.rss_p).epsilon(1e-9));
  CHECK((a.tau_hat - b.tau_hat).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("reported rss_p is reproducible through the public predict path") {
  const CalibrationDataset data = generate_toy_data(1, 20, 12, 15);
  for (Method m : {Method::kAnls, Method::kSmle, Method::kFullMle, Method::kMaxMin}) {
    TuningEstimate est;
    MaxMinConfig cfg;
    cfg.max_iterations = 3;
    switch (m) {
      case Method::kAnls: est = anls(data, GPModel::kCommonTheta, quick_opts()); break;
      case Method::kSmle: est = smle(data, GPModel::kCommonTheta, quick_opts()); break;
      case Method::kFullMle: est = full_mle(data, GPModel::kCommonTheta, quick_opts()); break;
      case Method::kMaxMin: est = maxmin(data, GPModel::kCommonTheta, cfg, quick_opts()); break;
    }
    const double again = rss_p(est.tau_hat, *est.fitted, est.variant, data.exp(), est.bias);
    CHECK(std::fabs(est.rss_p - again) <= 1e-10 * (1.0 + std::fabs(est.rss_p)));
    CHECK(!est.trace.empty());
    CHECK(est.trace.back().rss_p == est.rss_p);
    CHECK((est.trace.back().tau.array() == est.tau_hat.array()).all());
  }
}

TEST_CASE("separated-likelihood moments match brute-force conditioning") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    RngStream rng(seed, 3);
    const Eigen::MatrixXd X = oracles::random_matrix(rng, 5, 2);
    const Eigen::MatrixXd F = first_order_basis(X);
    const Eigen::VectorXd beta = oracles::random_vector(rng, 3, -1.0, 1.0);
    const Eigen::VectorXd y_c = oracles::random_vector(rng, 3, -1.0, 1.0);
    const KernelSpec k = KernelSpec::common(rng.uniform(0.3, 2.0));
    const double sigma2 = rng.uniform(0.5, 2.0);
    const Eigen::MatrixXd V =
        assemble_covariance(X, 3, k, sigma2, VarianceRatios{0.0, rng.uniform(0.05, 0.4)});
    const ConditionalMoments got = conditional_moments(V, 3, F, beta, y_c);
    const auto [mean, cov] = oracles::condition_explicit(V, 3, F, beta, y_c);
    CHECK((got.mean - mean).lpNorm<Eigen::Infinity>() /
              std::max(1e-30, mean.lpNorm<Eigen::Infinity>()) <
          1e-10);
    CHECK((got.cov - cov).lpNorm<Eigen::Infinity>() / cov.lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("independence limit: huge rates decouple the two blocks") {
  RngStream rng(13, 0);
  const Eigen::MatrixXd X = oracles::random_matrix(rng, 6, 2);
  const Eigen::MatrixXd F = first_order_basis(X);
  const Eigen::VectorXd beta = oracles::random_vector(rng, 3);
  const Eigen::VectorXd y_c = oracles::random_vector(rng, 4);
  const double gamma_e = 0.3;
  const Eigen::MatrixXd V = assemble_covariance(X, 4, KernelSpec::common(1e12), 1.0,
                                                VarianceRatios{0.0, gamma_e}, 0.0);
  const ConditionalMoments cond = conditional_moments(V, 4, F, beta, y_c);
  CHECK((cond.mean - F.bottomRows(2) * beta).lpNorm<Eigen::Infinity>() < 1e-12);
  Eigen::MatrixXd v_ee_expected = Eigen::MatrixXd::Identity(2, 2) * (1.0 + gamma_e);
  CHECK((cond.cov - v_ee_expected).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("full-mle with no tuning inputs reduces to a plain combined fit") {
  RngStream rng(21, 0);
  const Eigen::MatrixXd xc = oracles::random_matrix(rng, 12, 1, 0.0, 1.0);
  Eigen::VectorXd yc(12);
  for (int i = 0; i < 12; ++i) yc[i] = std::sin(3.0 * xc(i, 0));
  const Eigen::MatrixXd xe = oracles::random_matrix(rng, 6, 1, 0.0, 1.0);
  Eigen::VectorXd ye(6);
  for (int i = 0; i < 6; ++i) ye[i] = std::sin(3.0 * xe(i, 0)) + 0.01 * rng.normal();
  const CalibrationDataset data(ComputerData(Eigen::MatrixXd(12, 0), xc, yc),
                                ExperimentalData(xe, ye));
  const TuningEstimate est = full_mle(data, GPModel::kCommonTheta, quick_opts());
  CHECK(est.tau_hat.size() == 0);
  const Eigen::VectorXd pred = est.fitted->predict(xe, Predictor::kCombined);
  CHECK(est.rss_p == doctest::Approx((ye - pred).squaredNorm()).epsilon(1e-10));
}

TEST_CASE("full-mle objective at the solution dominates the generating tau") {
  const CalibrationDataset data = generate_toy_data(6, 15, 10, 23, {0.05, false});
  const TuningEstimate est = full_mle(data, GPModel::kCommonTheta, quick_opts());
  // Re-evaluate the concentrated likelihood at tau_hat and at tau_star with
  // the same estimated covariance parameters.
  const FittedGP& gp = *est.fitted;
  const Standardizer& std = gp.standardizer();
  auto objective_at = [&](const Eigen::VectorXd& tau) {
    CombinedData c = assemble_combined(data.comp(), data.exp(), tau);
    c.X = std.map_inputs(c.X);
    c.F = first_order_basis(c.X);
    c.y = std.map_responses(c.y);
    return concentrated_neg2loglik(gp.kernel(), gp.gamma_e(), c).neg2loglik;
  };
  CHECK(objective_at(est.tau_hat) <= objective_at(test_function(6).tau_star) + 1e-9);
}

TEST_CASE("maxmin with a single iteration is bit-identical to anls") {
  const CalibrationDataset data = generate_toy_data(6, 15, 10, 31);
  const CalibrateOptions opts = quick_opts();
  MaxMinConfig cfg;
  cfg.max_iterations = 1;
  const TuningEstimate a = anls(data, GPModel::kCommonTheta, opts);
  const TuningEstimate m = maxmin(data, GPModel::kCommonTheta, cfg, opts);
  CHECK(m.method == Method::kMaxMin);
  CHECK((a.tau_hat.array() == m.tau_hat.array()).all());
  CHECK(a.rss_p == m.rss_p);
  CHECK(m.trace.size() == 1);
}

TEST_CASE("maxmin trace: running minimum non-increasing with fluctuation off") {
  const CalibrationDataset data = generate_toy_data(1, 25, 20, 33);
  MaxMinConfig cfg;  // defaults: ftol 1e-4, maxagain 7, fluctuation off
  const TuningEstimate est = maxmin(data, GPModel::kCommonTheta, cfg, quick_opts());
  REQUIRE(est.trace.size() >= 2);
  double running = est.trace.front().rss_p;
  for (const TraceEntry& e : est.trace) {
    const double next_running = std::min(running, e.rss_p);
    CHECK(next_running <= running + 1e-12);
    running = next_running;
  }
  // Improvement-based stop with sane defaults, well before the iteration cap.
  CHECK(est.trace.size() <= 7);
  CHECK(est.stop_reason != StopReason::kNone);
}

TEST_CASE("stall semantics: immediate stop without fluctuation, maxagain with it") {
  const CalibrationDataset data = generate_toy_data(6, 15, 10, 35);
  MaxMinConfig plain;
  plain.stop_rule = StopRule::kMinImprovement;
  const TuningEstimate a = maxmin(data, GPModel::kCommonTheta, plain, quick_opts());
  if (a.stop_reason == StopReason::kMinImprovement) {
    // Exactly one trailing stalled round.
    const std::size_t n = a.trace.size();
    REQUIRE(n >= 2);
    CHECK(a.trace[n - 1].rss_p > a.trace[n - 2].rss_p - plain.ftol);
    for (std::size_t i = 2; i + 1 < n; ++i)
      CHECK(a.trace[i].rss_p <= a.trace[i - 1].rss_p - plain.ftol);
  }

  MaxMinConfig fluct = plain;
  fluct.fluctuation_enabled = true;
  fluct.maxagain = 2;
  const TuningEstimate b = maxmin(data, GPModel::kCommonTheta, fluct, quick_opts());
  int consecutive = 0, longest = 0;
  for (std::size_t i = 1; i < b.trace.size(); ++i) {
    consecutive = b.trace[i].rss_p > b.trace[i - 1].rss_p - fluct.ftol ? consecutive + 1 : 0;
    longest = std::max(longest, consecutive);
  }
  CHECK(longest <= fluct.maxagain);
}

TEST_CASE("maxmin honours the hard iteration cap") {
  const CalibrationDataset data = generate_toy_data(6, 12, 8, 37);
  MaxMinConfig cfg;
  cfg.max_iterations = 3;
  cfg.stop_rule = StopRule::kMaxIter;
  const TuningEstimate est = maxmin(data, GPModel::kCommonTheta, cfg, quick_opts());
  CHECK(est.trace.size() == 3);
  CHECK(est.stop_reason == StopReason::kMaxIterations);
}

TEST_CASE("maxmin with fluctuation enabled is reproducible under one seed") {
  const CalibrationDataset data = generate_toy_data(6, 15, 10, 39);
  MaxMinConfig cfg;
  cfg.fluctuation_enabled = true;
  cfg.max_iterations = 5;
  CalibrateOptions opts = quick_opts();
  opts.seed = 77;
  const TuningEstimate a = maxmin(data, GPModel::kCommonTheta, cfg, opts);
  const TuningEstimate b = maxmin(data, GPModel::kCommonTheta, cfg, opts);
  CHECK((a.tau_hat.array() == b.tau_hat.array()).all());
  CHECK(a.rss_p == b.rss_p);
  CHECK(a.trace.size() == b.trace.size());
}

TEST_CASE("constructed affine bias is recovered by the joint search") {
  // Mechanism oracle: take the surrogate itself as the truth and build
  // responses 2 * prediction + 3, so (tau, rho, delta) = (tau0, 2, 3) zeroes
  // the objective exactly. The exp-in-tau structure keeps rho and tau jointly
  // identifiable.
  const CalibrationDataset raw = generate_toy_data(1, 60, 25, 41, {0.0, false});
  const FittedGP gp = fit_mle(raw, GPModel::kCommonTheta, TrainingSet::kComputerOnly);
  const Eigen::VectorXd tau0 = test_function(1).tau_star;
  const Eigen::VectorXd pred =
      gp.predict(assemble_experimental_inputs(raw.exp(), tau0), Predictor::kComputer);
  const CalibrationDataset data(
      raw.comp(), ExperimentalData(raw.exp().x_inputs(), 2.0 * pred.array() + 3.0));
  CalibrateOptions opts;
  opts.bias_correction = true;
  const TuningEstimate est = anls(data, GPModel::kCommonTheta, opts);
  REQUIRE(est.bias.has_value());
  CHECK(est.bias->rho == doctest::Approx(2.0).epsilon(1e-2));
  CHECK(std::fabs(est.bias->delta - 3.0) < 3e-2);
  CHECK(est.rss_p < 1e-6);
}

TEST_CASE("affine bias against the true simulator on a dense design") {
  // With the real function as truth the surrogate error leaks into the
  // constants; a dense design keeps them close.
  const CalibrationDataset raw = generate_toy_data(7, 250, 25, 41, {0.0, false});
  Eigen::VectorXd ye(raw.exp().n());
  for (Eigen::Index i = 0; i < ye.size(); ++i)
    ye[i] = 2.0 * eval_test_function(7, test_function(7).tau_star,
                                     raw.exp().x_inputs().row(i).transpose()) +
            3.0;
  const CalibrationDataset data(raw.comp(), ExperimentalData(raw.exp().x_inputs(), ye));
  CalibrateOptions opts = quick_opts();
  opts.tau_multistart = 6;
  opts.bias_correction = true;
  const TuningEstimate est = anls(data, GPModel::kSeparableTheta, opts);
  REQUIRE(est.bias.has_value());
  CHECK(est.bias->rho == doctest::Approx(2.0).epsilon(2e-2));
  CHECK(std::fabs(est.bias->delta - 3.0) < 1e-1);
}

TEST_CASE("bias-disabled path is unchanged by the bias machinery") {
  const CalibrationDataset data = generate_toy_data(7, 15, 10, 43);
  CalibrateOptions opts = quick_opts();
  const TuningEstimate plain = anls(data, GPModel::kCommonTheta, opts);
  CHECK(!plain.bias.has_value());
}

TEST_CASE("relative improvement arithmetic and guards") {
  CHECK(relative_improvement(2.0, 2.0) == 0.0);
  CHECK(relative_improvement(2.0, 1.0) == 50.0);
  CHECK_THROWS(relative_improvement(0.0, 1.0));
  CHECK_THROWS(relative_improvement(-1.0, 1.0));
}

TEST_CASE("confidence region: threshold composition and membership") {
  const CalibrationDataset data = generate_toy_data(6, 15, 10, 45);
  CalibrateOptions opts = quick_opts();
  const TuningEstimate est = anls(data, GPModel::kCommonTheta, opts);
  const Eigen::MatrixXd bounds = resolve_tau_bounds(data, opts);
  ConfidenceGridSpec grid;
  grid.n_i = 21;
  grid.n_j = 21;
  const ConfidenceRegion cr =
      confidence_region(est, data.exp(), 0.05, {0, 1}, grid, bounds);
  const Eigen::Index q = est.tau_hat.size();
  const Eigen::Index ne = data.exp().n();
  const double expected =
      est.rss_p * (1.0 + static_cast<double>(q) / (ne - q) * f_quantile(0.05, q, ne - q));
  CHECK(std::fabs(cr.threshold - expected) <= 1e-12 * expected);

  // The estimate itself is inside: its rss is below the threshold by
  // construction, and the minimum over the grid cannot undercut it much.
  CHECK(est.rss_p <= cr.threshold);
  double grid_min = cr.rss.minCoeff();
  CHECK(grid_min >= est.rss_p - 1e-6 * (1.0 + est.rss_p));

  // The grid cell nearest tau_hat is flagged inside.
  Eigen::Index bi, bj;
  (cr.grid_i.array() - est.tau_hat[0]).abs().minCoeff(&bi);
  (cr.grid_j.array() - est.tau_hat[1]).abs().minCoeff(&bj);
  CHECK(cr.inside(bi, bj) == 1);
}

TEST_CASE("confidence region shrinks toward the minimizer as alpha grows") {
  const CalibrationDataset data = generate_toy_data(6, 15, 10, 47);
  CalibrateOptions opts = quick_opts();
  const TuningEstimate est = anls(data, GPModel::kCommonTheta, opts);
  const Eigen::MatrixXd bounds = resolve_tau_bounds(data, opts);
  ConfidenceGridSpec grid;
  grid.n_i = 15;
  grid.n_j = 15;
  const ConfidenceRegion wide = confidence_region(est, data.exp(), 0.05, {0, 1}, grid, bounds);
  const ConfidenceRegion tight =
      confidence_region(est, data.exp(), 0.999, {0, 1}, grid, bounds);
  CHECK(tight.inside.sum() <= wide.inside.sum());
  CHECK(tight.threshold < wide.threshold);
}

TEST_CASE("confidence region input validation") {
  const CalibrationDataset data = generate_toy_data(6, 12, 8, 49);
  const TuningEstimate est = anls(data, GPModel::kCommonTheta, quick_opts());
  const Eigen::MatrixXd bounds = resolve_tau_bounds(data, quick_opts());
  CHECK_THROWS(confidence_region(est, data.exp(), 0.0, {0, 1}, {}, bounds));
  CHECK_THROWS(confidence_region(est, data.exp(), 0.05, {0, 0}, {}, bounds));
  ConfidenceGridSpec degenerate;
  degenerate.n_i = 1;
  CHECK_THROWS(confidence_region(est, data.exp(), 0.05, {0, 1}, degenerate, bounds));
}

TEST_CASE("likelihood methods reject the bias flag") {
  const CalibrationDataset data = generate_toy_data(6, 12, 8, 51);
  CalibrateOptions opts = quick_opts();
  opts.bias_correction = true;
  CHECK_THROWS(smle(data, GPModel::kCommonTheta, opts));
  CHECK_THROWS(full_mle(data, GPModel::kCommonTheta, opts));
}

}  // TEST_SUITE
