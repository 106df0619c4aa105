#include "codetune/calibrate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "codetune/stats.hpp"

namespace codetune {

namespace {

constexpr std::uint64_t kFluctuationStream = 0xf1;

struct TauSearch {
  Eigen::VectorXd tau;
  double rss = 0.0;
  std::optional<BiasConstants> bias;
  Eigen::VectorXd raw;  // full optimizer vector (tau plus bias coordinates)
};

Eigen::MatrixXd bias_box(const ExperimentalData& exp) {
  // rho in [-10, 10], delta within ten response magnitudes; wide enough for
  // any sane correction while keeping the search box finite.
  const double dspan = 10.0 * (1.0 + exp.responses().cwiseAbs().maxCoeff());
  Eigen::MatrixXd b(2, 2);
  b << -10.0, 10.0, -dspan, dspan;
  return b;
}

TauSearch unpack_search(const Eigen::VectorXd& v, Eigen::Index q, bool bias, double rss) {
  TauSearch s;
  s.tau = v.head(q);
  s.rss = rss;
  s.raw = v;
  if (bias) s.bias = BiasConstants{v[q], v[q + 1]};
  return s;
}

/// One rss_p minimization stage over the tau box (optionally joint with the
/// bias constants). `warm` is tried first and preferred on numerical near-ties
/// so alternating callers do not flip between indistinguishable minima.
TauSearch minimize_rss(const FittedGP& gp, Predictor variant, const ExperimentalData& exp,
                       const Eigen::MatrixXd& bounds, const CalibrateOptions& opts,
                       const std::optional<Eigen::VectorXd>& warm, bool warm_only = false) {
  const Eigen::Index q = bounds.rows();
  const bool bias = opts.bias_correction;
  const Eigen::Index dim = q + (bias ? 2 : 0);

  OptProblem prob;
  prob.lower.resize(dim);
  prob.upper.resize(dim);
  prob.lower.head(q) = bounds.col(0);
  prob.upper.head(q) = bounds.col(1);
  if (bias) {
    const Eigen::MatrixXd bb = bias_box(exp);
    prob.lower.tail(2) = bb.col(0);
    prob.upper.tail(2) = bb.col(1);
  }
  auto raw_objective = [&](const Eigen::VectorXd& v) -> double {
    const std::optional<BiasConstants> b =
        bias ? std::optional<BiasConstants>(BiasConstants{v[q], v[q + 1]}) : std::nullopt;
    try {
      return rss_p(v.head(q), gp, variant, exp, b);
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  auto with_bias_coords = [&](const Eigen::VectorXd& tau_part) {
    Eigen::VectorXd v(dim);
    v.head(q) = tau_part;
    if (bias) {
      v[q] = 1.0;
      v[q + 1] = 0.0;
    }
    return v;
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(with_bias_coords(0.5 * (bounds.col(0) + bounds.col(1))));
  for (const auto& s : spacefill_starts(bounds.col(0), bounds.col(1), opts.tau_multistart - 1))
    starts.push_back(with_bias_coords(s));

  // The residual sum can sit at a tiny absolute scale (small estimated noise
  // ratio), which would trip the gradient tolerance immediately; normalize by
  // the objective at the center start so the search is scale-free.
  double scale = raw_objective(starts.front());
  if (!std::isfinite(scale) || scale <= 0.0) scale = 1.0;
  prob.objective = [&, scale](const Eigen::VectorXd& v) { return raw_objective(v) / scale; };

  if (warm) {
    OptProblem warm_prob = prob;
    Eigen::VectorXd w = *warm;
    if (w.size() == q) w = with_bias_coords(w);
    warm_prob.starts = {w};
    OptResult warm_res = minimize(warm_prob, opts.tau_opt);
    if (warm_only) return unpack_search(warm_res.argmin, q, bias, raw_objective(warm_res.argmin));
    prob.starts = std::move(starts);
    OptResult rest = minimize(prob, opts.tau_opt);
    const Eigen::VectorXd& arg =
        warm_res.value <= rest.value + 1e-10 * (1.0 + std::fabs(rest.value)) ? warm_res.argmin
                                                                             : rest.argmin;
    return unpack_search(arg, q, bias, raw_objective(arg));
  }
  prob.starts = std::move(starts);
  OptResult res = minimize(prob, opts.tau_opt);
  return unpack_search(res.argmin, q, bias, raw_objective(res.argmin));
}

TuningEstimate anls_stage(const CalibrationDataset& data, GPModel model,
                          const CalibrateOptions& opts, Method label) {
  const Eigen::MatrixXd bounds = resolve_tau_bounds(data, opts);
  FitOptions fopts = opts.fit;
  fopts.tau_bounds = bounds;
  auto gp = std::make_shared<FittedGP>(
      fit_mle(data, model, TrainingSet::kComputerOnly, std::nullopt, fopts));
  TauSearch s = minimize_rss(*gp, Predictor::kComputer, data.exp(), bounds, opts, std::nullopt);

  TuningEstimate est;
  est.tau_hat = s.tau;
  est.rss_p = s.rss;
  est.method = label;
  est.variant = Predictor::kComputer;
  est.bias = s.bias;
  est.trace.push_back({1, s.tau, s.rss});
  est.fitted = std::move(gp);
  return est;
}

}  // namespace

double rss_p(const Eigen::VectorXd& tau, const FittedGP& fitted, Predictor variant,
             const ExperimentalData& exp, const std::optional<BiasConstants>& bias) {
  const Eigen::MatrixXd x0 = assemble_experimental_inputs(exp, tau);
  Eigen::VectorXd pred = fitted.predict(x0, variant);
  if (bias) pred = bias->rho * pred.array() + bias->delta;
  return (exp.responses() - pred).squaredNorm();
}

Eigen::MatrixXd resolve_tau_bounds(const CalibrationDataset& data, const CalibrateOptions& opts) {
  if (opts.tau_bounds) {
    if (opts.tau_bounds->rows() != data.q() || opts.tau_bounds->cols() != 2)
      throw std::invalid_argument("tau_bounds must be q x 2");
    if (((opts.tau_bounds->col(1) - opts.tau_bounds->col(0)).array() <= 0.0).any())
      throw std::invalid_argument("tau_bounds must have lower < upper");
    return *opts.tau_bounds;
  }
  Eigen::MatrixXd b(data.q(), 2);
  for (Eigen::Index j = 0; j < data.q(); ++j) {
    b(j, 0) = data.comp().t_inputs().col(j).minCoeff();
    b(j, 1) = data.comp().t_inputs().col(j).maxCoeff();
  }
  return b;
}

TuningEstimate anls(const CalibrationDataset& data, GPModel model, const CalibrateOptions& opts) {
  return anls_stage(data, model, opts, Method::kAnls);
}

TuningEstimate smle(const CalibrationDataset& data, GPModel model, const CalibrateOptions& opts) {
  if (opts.bias_correction)
    throw std::invalid_argument("smle: bias correction applies to the least-squares methods only");
  const Eigen::MatrixXd bounds = resolve_tau_bounds(data, opts);
  FitOptions fopts = opts.fit;
  fopts.tau_bounds = bounds;
  auto gp_c = std::make_shared<FittedGP>(
      fit_mle(data, model, TrainingSet::kComputerOnly, std::nullopt, fopts));

  // Fixed stage-1 quantities in standardized space.
  const Standardizer& std = gp_c->standardizer();
  const Eigen::MatrixXd& z_c = gp_c->train_inputs();
  const Eigen::VectorXd& y_cs = gp_c->train_responses();
  const Eigen::VectorXd y_es = std.map_responses(data.exp().responses());
  const Eigen::Index q = data.q();
  const Eigen::Index n_c = z_c.rows();
  const Eigen::Index n_e = data.exp().n();

  // Concentrated conditional likelihood of the experimental block given the
  // computer block, at unit process variance: n_E log s2 + log|C_cond| with
  // s2 = (y_E - mu)' C_cond^-1 (y_E - mu) / n_E.
  auto objective = [&](const Eigen::VectorXd& v) -> double {
    const Eigen::VectorXd tau = v.head(q);
    const double gamma_e = std::exp(v[q]);
    const Eigen::MatrixXd x_e = assemble_experimental_inputs(data.exp(), tau);
    const Eigen::Index n_b = n_c + n_e;
    Eigen::MatrixXd z_b(n_b, z_c.cols());
    z_b.topRows(n_c) = z_c;
    z_b.bottomRows(n_e) = std.map_inputs(x_e);
    const Eigen::MatrixXd c_b = assemble_covariance(z_b, n_c, gp_c->kernel(), 1.0,
                                                    VarianceRatios{0.0, gamma_e}, gp_c->jitter());
    try {
      const ConditionalMoments cond = conditional_moments(
          c_b, n_c, first_order_basis(z_b), gp_c->beta(), y_cs);
      Eigen::LLT<Eigen::MatrixXd> chol(cond.cov);
      if (chol.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const Eigen::VectorXd rw = chol.matrixL().solve(y_es - cond.mean);
      double s2 = rw.squaredNorm() / static_cast<double>(n_e);
      if (!(s2 > 0.0)) s2 = std::numeric_limits<double>::min();
      return n_e * std::log(s2) + 2.0 * chol.matrixLLT().diagonal().array().log().sum();
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  OptProblem prob;
  prob.objective = objective;
  prob.lower.resize(q + 1);
  prob.upper.resize(q + 1);
  prob.lower.head(q) = bounds.col(0);
  prob.upper.head(q) = bounds.col(1);
  prob.lower[q] = std::log(opts.fit.gamma_lo);
  prob.upper[q] = std::log(opts.fit.gamma_hi);
  Eigen::VectorXd fixed(q + 1);
  fixed.head(q) = 0.5 * (bounds.col(0) + bounds.col(1));
  fixed[q] = std::log(0.01);
  prob.starts.push_back(fixed);
  for (auto& s : spacefill_starts(prob.lower, prob.upper, opts.tau_multistart - 1))
    prob.starts.push_back(std::move(s));
  OptResult res = minimize(prob, opts.tau_opt);

  TuningEstimate est;
  est.tau_hat = res.argmin.head(q);
  est.method = Method::kSmle;
  est.variant = Predictor::kComputer;
  est.aux_gamma_e = std::exp(res.argmin[q]);
  est.rss_p = rss_p(est.tau_hat, *gp_c, Predictor::kComputer, data.exp());
  est.trace.push_back({1, est.tau_hat, est.rss_p});
  est.fitted = std::move(gp_c);
  return est;
}

TuningEstimate full_mle(const CalibrationDataset& data, GPModel model,
                        const CalibrateOptions& opts) {
  if (opts.bias_correction)
    throw std::invalid_argument(
        "full_mle: bias correction applies to the least-squares methods only");
  const Eigen::Index q = data.q();
  Eigen::MatrixXd bounds(q, 2);
  if (q > 0) bounds = resolve_tau_bounds(data, opts);
  const Standardizer std = Standardizer::from_dataset(
      data.comp(), &data.exp(), q > 0 ? std::optional<Eigen::MatrixXd>(bounds) : std::nullopt,
      ResponseScope::kCombined);
  const Eigen::Index d = data.q() + data.p();
  const Eigen::Index n_theta = model == GPModel::kCommonTheta ? 1 : d;
  const Eigen::Index dim = q + n_theta + 1;

  auto unpack = [&](const Eigen::VectorXd& v) {
    KernelSpec k = model == GPModel::kCommonTheta
                       ? KernelSpec::common(std::exp(v[q]))
                       : KernelSpec::separable(v.segment(q, n_theta).array().exp());
    return std::make_pair(k, std::exp(v[q + n_theta]));
  };

  auto objective = [&](const Eigen::VectorXd& v) -> double {
    const auto [kernel, gamma_e] = unpack(v);
    CombinedData c = assemble_combined(data.comp(), data.exp(), v.head(q));
    c.X = std.map_inputs(c.X);
    c.F = first_order_basis(c.X);
    c.y = std.map_responses(c.y);
    try {
      return concentrated_neg2loglik(kernel, gamma_e, c, opts.fit.jitter).neg2loglik;
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  OptProblem prob;
  prob.objective = objective;
  prob.lower.resize(dim);
  prob.upper.resize(dim);
  if (q > 0) {
    prob.lower.head(q) = bounds.col(0);
    prob.upper.head(q) = bounds.col(1);
  }
  prob.lower.segment(q, n_theta).setConstant(std::log(opts.fit.theta_lo));
  prob.upper.segment(q, n_theta).setConstant(std::log(opts.fit.theta_hi));
  prob.lower[q + n_theta] = std::log(opts.fit.gamma_lo);
  prob.upper[q + n_theta] = std::log(opts.fit.gamma_hi);
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(dim);
  if (q > 0) fixed.head(q) = 0.5 * (bounds.col(0) + bounds.col(1));
  fixed[q + n_theta] = std::log(0.01);
  prob.starts.push_back(fixed);
  for (auto& s : spacefill_starts(prob.lower, prob.upper, opts.tau_multistart - 1))
    prob.starts.push_back(std::move(s));
  OptResult res = minimize(prob, opts.tau_opt);

  const auto [kernel, gamma_e] = unpack(res.argmin);
  const Eigen::VectorXd tau_hat = res.argmin.head(q);
  const CombinedData c = assemble_combined(data.comp(), data.exp(), tau_hat);
  auto gp = std::make_shared<FittedGP>(FittedGP::at_hyperparameters(
      std, TrainingSet::kCombined, kernel, gamma_e, c.X, c.y, c.n_comp, tau_hat,
      opts.fit.jitter));

  TuningEstimate est;
  est.tau_hat = tau_hat;
  est.method = Method::kFullMle;
  est.variant = Predictor::kCombined;
  est.rss_p = rss_p(tau_hat, *gp, Predictor::kCombined, data.exp());
  est.trace.push_back({1, tau_hat, est.rss_p});
  est.fitted = std::move(gp);
  return est;
}

TuningEstimate maxmin(const CalibrationDataset& data, GPModel model, const MaxMinConfig& cfg,
                      const CalibrateOptions& opts) {
  if (cfg.max_iterations < 1) throw std::invalid_argument("maxmin: max_iterations must be >= 1");
  if (!(cfg.ftol > 0.0)) throw std::invalid_argument("maxmin: ftol must be positive");
  if (cfg.maxagain < 1) throw std::invalid_argument("maxmin: maxagain must be >= 1");
  if (cfg.step4_variant == Predictor::kComputer)
    throw std::invalid_argument("maxmin: refit rounds need a combined-data predictor");

  TuningEstimate est = anls_stage(data, model, opts, Method::kMaxMin);
  est.stop_reason = StopReason::kMaxIterations;
  if (cfg.max_iterations == 1) return est;

  const Eigen::MatrixXd bounds = resolve_tau_bounds(data, opts);
  FitOptions fopts = opts.fit;
  fopts.tau_bounds = bounds;
  const bool rule_abs =
      cfg.stop_rule == StopRule::kMinImprovement || cfg.stop_rule == StopRule::kAll;
  const bool rule_rel =
      cfg.stop_rule == StopRule::kMinRelImprovement || cfg.stop_rule == StopRule::kAll;

  RngStream fluct(opts.seed, kFluctuationStream);
  Eigen::VectorXd cur_tau = est.tau_hat;   // value the next refit is frozen at
  Eigen::VectorXd warm = est.trace.back().tau;
  if (est.bias) {
    warm.conservativeResize(warm.size() + 2);
    warm[warm.size() - 2] = est.bias->rho;
    warm[warm.size() - 1] = est.bias->delta;
  }
  double prev_rss = est.rss_p;
  double running_min = est.rss_p;
  int stalls = 0;  // consecutive rounds whose improvement fell below ftol

  for (int iter = 2; iter <= cfg.max_iterations; ++iter) {
    auto gp_b = std::make_shared<FittedGP>(
        fit_mle(data, model, TrainingSet::kCombined, cur_tau, fopts));
    TauSearch s =
        minimize_rss(*gp_b, cfg.step4_variant, data.exp(), bounds, opts, warm, cfg.step4_warm_only);

    est.trace.push_back({iter, s.tau, s.rss});
    est.tau_hat = s.tau;
    est.rss_p = s.rss;
    est.bias = s.bias;
    est.variant = cfg.step4_variant;
    est.fitted = gp_b;

    const bool stall_abs = rule_abs && s.rss > prev_rss - cfg.ftol;
    const bool stall_rel = rule_rel && (s.rss - prev_rss) / prev_rss > -cfg.ftol;
    if (stall_abs || stall_rel) {
      ++stalls;
      // Without the random fluctuation a stalled round would repeat itself,
      // so the improvement rule fires at once; with it, the perturbed refit
      // gets maxagain consecutive chances to break the stall.
      if (!cfg.fluctuation_enabled || stalls >= cfg.maxagain) {
        est.stop_reason =
            stall_abs ? StopReason::kMinImprovement : StopReason::kMinRelImprovement;
        break;
      }
    } else {
      stalls = 0;
    }
    if (iter >= cfg.max_iterations) {
      est.stop_reason = StopReason::kMaxIterations;
      break;
    }

    prev_rss = s.rss;
    cur_tau = s.tau;
    warm = s.raw;
    if (cfg.fluctuation_enabled && s.rss > running_min + cfg.ftol) {
      for (Eigen::Index j = 0; j < cur_tau.size(); ++j) {
        const double sd = std::max(0.1 * std::fabs(cur_tau[j]), 0.3);
        cur_tau[j] += sd * fluct.normal();
        cur_tau[j] = std::min(std::max(cur_tau[j], bounds(j, 0)), bounds(j, 1));
      }
    }
    running_min = std::min(running_min, s.rss);
  }
  return est;
}

double relative_improvement(double rss_anls_mean, double rss_maxmin_mean) {
  if (!(rss_anls_mean > 0.0))
    throw std::invalid_argument("relative_improvement: anls mean must be positive");
  return 100.0 * (rss_anls_mean - rss_maxmin_mean) / rss_anls_mean;
}

ConfidenceRegion confidence_region(const TuningEstimate& est, const ExperimentalData& exp,
                                   double alpha, std::pair<int, int> pair,
                                   const ConfidenceGridSpec& grid,
                                   const std::optional<Eigen::MatrixXd>& tau_bounds) {
  const Eigen::Index q = est.tau_hat.size();
  const Eigen::Index n_e = exp.n();
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("confidence_region: alpha must be in (0,1)");
  if (n_e <= q) throw std::invalid_argument("confidence_region: need n_E > q");
  if (pair.first == pair.second || pair.first < 0 || pair.second < 0 || pair.first >= q ||
      pair.second >= q)
    throw std::invalid_argument("confidence_region: bad coordinate pair");
  if (grid.n_i < 2 || grid.n_j < 2) throw std::invalid_argument("confidence_region: degenerate grid");
  if (!est.fitted) throw std::invalid_argument("confidence_region: estimate has no fitted GP");

  auto axis_range = [&](int coord, const std::optional<Eigen::Vector2d>& explicit_range) {
    if (explicit_range) {
      if (!((*explicit_range)[1] > (*explicit_range)[0]))
        throw std::invalid_argument("confidence_region: degenerate grid");
      return *explicit_range;
    }
    if (!tau_bounds)
      throw std::invalid_argument("confidence_region: no grid ranges and no tau bounds");
    return Eigen::Vector2d((*tau_bounds)(coord, 0), (*tau_bounds)(coord, 1));
  };
  const Eigen::Vector2d ri = axis_range(pair.first, grid.range_i);
  const Eigen::Vector2d rj = axis_range(pair.second, grid.range_j);

  ConfidenceRegion out;
  out.alpha = alpha;
  out.coord_i = pair.first;
  out.coord_j = pair.second;
  out.f_value = f_quantile(alpha, static_cast<int>(q), static_cast<int>(n_e - q));
  out.threshold =
      est.rss_p * (1.0 + static_cast<double>(q) / static_cast<double>(n_e - q) * out.f_value);
  out.grid_i = Eigen::VectorXd::LinSpaced(grid.n_i, ri[0], ri[1]);
  out.grid_j = Eigen::VectorXd::LinSpaced(grid.n_j, rj[0], rj[1]);
  out.rss.resize(grid.n_i, grid.n_j);
  out.inside.resize(grid.n_i, grid.n_j);

  // Off-pair coordinates: slice at tau_hat, or re-minimize per grid point.
  std::vector<Eigen::Index> off;
  for (Eigen::Index k = 0; k < q; ++k)
    if (k != pair.first && k != pair.second) off.push_back(k);

  for (int a = 0; a < grid.n_i; ++a) {
    for (int b = 0; b < grid.n_j; ++b) {
      Eigen::VectorXd tau = est.tau_hat;
      tau[pair.first] = out.grid_i[a];
      tau[pair.second] = out.grid_j[b];
      double val;
      if (grid.profile_off_pair && !off.empty() && tau_bounds) {
        OptProblem prob;
        prob.lower.resize(off.size());
        prob.upper.resize(off.size());
        for (std::size_t k = 0; k < off.size(); ++k) {
          prob.lower[k] = (*tau_bounds)(off[k], 0);
          prob.upper[k] = (*tau_bounds)(off[k], 1);
        }
        prob.objective = [&](const Eigen::VectorXd& v) {
          Eigen::VectorXd t = tau;
          for (std::size_t k = 0; k < off.size(); ++k) t[off[k]] = v[k];
          return rss_p(t, *est.fitted, est.variant, exp, est.bias);
        };
        Eigen::VectorXd s0(off.size());
        for (std::size_t k = 0; k < off.size(); ++k) s0[k] = est.tau_hat[off[k]];
        prob.starts.push_back(s0);
        prob.starts.push_back(0.5 * (prob.lower + prob.upper));
        val = minimize(prob, OptOptions{}).value;
      } else {
        val = rss_p(tau, *est.fitted, est.variant, exp, est.bias);
      }
      out.rss(a, b) = val;
      out.inside(a, b) = val <= out.threshold ? 1 : 0;
    }
  }
  return out;
}

}  // namespace codetune
