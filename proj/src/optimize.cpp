#include "codetune/optimize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace codetune {

namespace {

Eigen::VectorXd clamp_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Zero out gradient components that push against an active bound.
Eigen::VectorXd project_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if ((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)) pg[i] = 0.0;
  }
  return pg;
}

struct RunResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

RunResult run_single(const OptProblem& p, const OptOptions& opts, const Eigen::VectorXd& start,
                     double f_start) {
  const Eigen::Index n = start.size();
  RunResult best;
  best.x = start;
  best.f = f_start;
  if (opts.record_trace) best.trace.push_back(f_start);

  Eigen::VectorXd x = start;
  double fx = f_start;
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad = fd_gradient(p.objective, x);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    best.iterations = iter + 1;
    const Eigen::VectorXd pg = project_gradient(grad, x, p.lower, p.upper);
    if (pg.lpNorm<Eigen::Infinity>() < opts.gtol) {
      best.converged = true;
      break;
    }

    Eigen::VectorXd dir = -(h_inv * grad);
    if (!dir.allFinite() || dir.dot(grad) > -1e-14 * dir.norm() * grad.norm()) {
      h_inv.setIdentity();
      dir = -grad;
    }

    // Backtracking Armijo search on the clamped step.
    constexpr double kArmijo = 1e-4;
    double t = 1.0;
    Eigen::VectorXd x_new = x;
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = clamp_box(x + t * dir, p.lower, p.upper);
      const Eigen::VectorXd step = x_new - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = p.objective(x_new);
      if (std::isfinite(f_new) && f_new <= fx + kArmijo * grad.dot(step)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if ((-(h_inv * grad) - (-grad)).lpNorm<Eigen::Infinity>() > 0.0) {
        // Retry once along steepest descent before giving up.
        h_inv.setIdentity();
        continue;
      }
      break;
    }

    const Eigen::VectorXd g_new = fd_gradient(p.objective, x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
      h_inv = (ident - rho * s * yv.transpose()) * h_inv * (ident - rho * yv * s.transpose()) +
              rho * s * s.transpose();
    }

    const double decrease = fx - f_new;
    x = x_new;
    grad = g_new;
    fx = f_new;
    if (fx < best.f) {
      best.f = fx;
      best.x = x;
    }
    if (opts.record_trace) best.trace.push_back(fx);
    if (decrease >= 0.0 && decrease < opts.ftol * (1.0 + std::fabs(fx))) {
      best.converged = true;
      break;
    }
  }
  return best;
}

}  // namespace

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step_scale) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step_scale * (1.0 + std::fabs(x[i]));
    xp[i] = x[i] + h;
    double fp = f(xp);
    xp[i] = x[i] - h;
    double fm = f(xp);
    xp[i] = x[i];
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[i] = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g[i] = (fp - f(x)) / h;
    } else if (std::isfinite(fm)) {
      g[i] = (f(x) - fm) / h;
    } else {
      g[i] = 0.0;
    }
  }
  return g;
}

std::vector<Eigen::VectorXd> spacefill_starts(const Eigen::VectorXd& lower,
                                              const Eigen::VectorXd& upper, int count) {
  const Eigen::Index d = lower.size();
  // Generalized golden ratio: the root of phi^(d+1) = phi + 1.
  double phi = 1.5;
  for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (d + 1));
  Eigen::VectorXd alpha(d);
  for (Eigen::Index j = 0; j < d; ++j) alpha[j] = std::pow(1.0 / phi, j + 1.0);

  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 1; k <= count; ++k) {
    Eigen::VectorXd u(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      double v = 0.5 + k * alpha[j];
      u[j] = v - std::floor(v);
    }
    pts.push_back(lower.array() + u.array() * (upper - lower).array());
  }
  return pts;
}

OptResult minimize(const OptProblem& problem, const OptOptions& opts) {
  if (problem.starts.empty()) throw std::invalid_argument("minimize: no starts given");
  if (problem.lower.size() != problem.upper.size())
    throw std::invalid_argument("minimize: bound size mismatch");
  if (!problem.lower.allFinite() || !problem.upper.allFinite())
    throw std::invalid_argument("minimize: bounds must be finite");

  OptResult out;
  bool have_result = false;
  int total_iters = 0;
  for (const Eigen::VectorXd& s0 : problem.starts) {
    const Eigen::VectorXd s = clamp_box(s0, problem.lower, problem.upper);
    const double f0 = problem.objective(s);
    if (!std::isfinite(f0)) continue;  // skip this start
    RunResult r = run_single(problem, opts, s, f0);
    total_iters += r.iterations;
    if (!have_result || r.f < out.value) {
      out.argmin = r.x;
      out.value = r.f;
      out.converged = r.converged;
      out.trace = std::move(r.trace);
      have_result = true;
    }
  }
  if (!have_result) throw std::runtime_error("minimize: objective non-finite at every start");
  out.iterations = total_iters;
  return out;
}

}  // namespace codetune
