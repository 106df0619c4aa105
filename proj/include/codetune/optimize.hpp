#ifndef CODETUNE_OPTIMIZE_HPP
#define CODETUNE_OPTIMIZE_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace codetune {

/// Box-constrained smooth minimization problem. Bounds must be finite and
/// every start must lie inside the box.
struct OptProblem {
  std::function<double(const Eigen::VectorXd&)> objective;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<Eigen::VectorXd> starts;
};

struct OptOptions {
  double gtol = 1e-6;    // projected-gradient infinity norm
  double ftol = 1e-10;   // relative function decrease
  int max_iters = 500;
  bool record_trace = false;
};

struct OptResult {
  Eigen::VectorXd argmin;
  double value = 0.0;
  int iterations = 0;      // summed over all starts
  bool converged = false;  // true if the winning start met gtol or ftol
  std::vector<double> trace;  // accepted objective values (winning start)
};

/// Quasi-Newton (BFGS) minimization with central finite-difference gradients,
/// backtracking line search and box handling by coordinate clamping plus
/// gradient projection. Runs every start, returns the best result (ties broken
/// by start index). Starts where the objective is non-finite are skipped;
/// throws std::runtime_error if every start is skipped. Fully deterministic.
OptResult minimize(const OptProblem& problem, const OptOptions& opts = {});

/// Central finite-difference gradient with per-coordinate step
/// h_i = step_scale * (1 + |x_i|); falls back to a one-sided difference when
/// an evaluation is non-finite.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step_scale = 1e-6);

/// Deterministic space-filling points inside a box (Weyl/Kronecker sequence
/// on irrational multiples). Used for optimizer multistarts.
std::vector<Eigen::VectorXd> spacefill_starts(const Eigen::VectorXd& lower,
                                              const Eigen::VectorXd& upper, int count);

}  // namespace codetune

#endif
