#ifndef CODETUNE_CALIBRATE_HPP
#define CODETUNE_CALIBRATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "codetune/gp.hpp"
#include "codetune/rng.hpp"

namespace codetune {

enum class Method { kAnls, kSmle, kFullMle, kMaxMin };

/// Multiplicative/additive correction of the predictor: rho * yhat + delta.
struct BiasConstants {
  double rho = 1.0;
  double delta = 0.0;
};

struct TraceEntry {
  int iteration = 0;
  Eigen::VectorXd tau;
  double rss_p = 0.0;
};

enum class StopReason {
  kNone,
  kMaxIterations,
  kMinImprovement,    // absolute improvement fell below ftol
  kMinRelImprovement  // relative improvement fell below ftol
};

struct TuningEstimate {
  Eigen::VectorXd tau_hat;
  double rss_p = 0.0;
  Method method = Method::kAnls;
  Predictor variant = Predictor::kComputer;
  std::optional<BiasConstants> bias;
  std::vector<TraceEntry> trace;
  std::shared_ptr<const FittedGP> fitted;  // GP in force at termination
  StopReason stop_reason = StopReason::kNone;
  std::optional<double> aux_gamma_e;  // separated-likelihood noise ratio
};

enum class StopRule { kMaxIter, kMinImprovement, kMinRelImprovement, kAll };

struct MaxMinConfig {
  int max_iterations = 20;
  double ftol = 1e-4;
  int maxagain = 7;
  bool fluctuation_enabled = false;
  Predictor step4_variant = Predictor::kCombined;
  StopRule stop_rule = StopRule::kAll;
  /// Refit rounds search from the previous tau only (local refinement) instead
  /// of repeating the full multistart.
  bool step4_warm_only = false;
};

struct CalibrateOptions {
  FitOptions fit{};
  OptOptions tau_opt{};
  int tau_multistart = 8;
  /// q x 2 search box for tau; defaults to the computer T column ranges (the
  /// surrogate is only trusted inside its training hull).
  std::optional<Eigen::MatrixXd> tau_bounds;
  bool bias_correction = false;
  std::uint64_t seed = kDefaultSeed;  // drives the fluctuation stream
};

/// Sum of squared experimental residuals against the BLUP at (tau, x_Ei); with
/// bias constants the predictor is replaced by rho * yhat + delta.
double rss_p(const Eigen::VectorXd& tau, const FittedGP& fitted, Predictor variant,
             const ExperimentalData& exp, const std::optional<BiasConstants>& bias = std::nullopt);

/// Tau search box actually used by the methods: user-provided or computer T
/// column min/max.
Eigen::MatrixXd resolve_tau_bounds(const CalibrationDataset& data, const CalibrateOptions& opts);

/// Fit the GP to computer data once, then minimize rss_p over tau with the
/// computer predictor.
TuningEstimate anls(const CalibrationDataset& data, GPModel model, const CalibrateOptions& opts = {});

/// Stage 1 estimates (theta, beta, sigma2) from computer data; stage 2
/// maximizes the concentrated conditional likelihood of the experimental data
/// given the computer data over (tau, gamma_E). rss_p is reported with the
/// stage-1 computer predictor for comparability.
TuningEstimate smle(const CalibrationDataset& data, GPModel model, const CalibrateOptions& opts = {});

/// Joint minimization of the concentrated combined-data likelihood over
/// (tau, theta, gamma_E); rss_p reported with the resulting combined fit.
TuningEstimate full_mle(const CalibrationDataset& data, GPModel model,
                        const CalibrateOptions& opts = {});

/// Alternating algorithm: computer-only fit and tau search first, then rounds
/// of {combined-data MLE at fixed tau; rss_p minimization with the combined
/// (or computer-from-combined) predictor} until a stopping rule fires. A
/// stalled round (improvement below ftol) terminates immediately when
/// fluctuation is off, since rerunning it would only repeat itself; with
/// fluctuation on, tau is perturbed with N(0, sigma_j^2),
/// sigma_j = max(0.1 |tau_j|, 0.3) before the next refit whenever the round
/// worsened the running minimum, and only maxagain consecutive stalls stop
/// the run.
TuningEstimate maxmin(const CalibrationDataset& data, GPModel model, const MaxMinConfig& cfg = {},
                      const CalibrateOptions& opts = {});

/// 100 * (anls - maxmin) / anls; throws on nonpositive anls mean.
double relative_improvement(double rss_anls_mean, double rss_maxmin_mean);

struct ConfidenceGridSpec {
  int n_i = 61;
  int n_j = 61;
  std::optional<Eigen::Vector2d> range_i;  // defaults to the tau box
  std::optional<Eigen::Vector2d> range_j;
  /// Re-minimize rss_p over the off-pair coordinates per grid point instead of
  /// slicing them at tau_hat.
  bool profile_off_pair = false;
};

struct ConfidenceRegion {
  double alpha = 0.05;
  double threshold = 0.0;  // rss_p(tau_hat) * (1 + q/(n_E-q) F_alpha(q, n_E-q))
  double f_value = 0.0;
  int coord_i = 0;
  int coord_j = 1;
  Eigen::VectorXd grid_i, grid_j;
  Eigen::MatrixXd rss;      // n_i x n_j
  Eigen::MatrixXi inside;   // 1 where rss <= threshold
};

/// rss_p on a lattice over the coordinate pair, remaining coordinates fixed at
/// tau_hat (or profiled on request); membership per the F-based threshold.
ConfidenceRegion confidence_region(const TuningEstimate& est, const ExperimentalData& exp,
                                   double alpha, std::pair<int, int> pair,
                                   const ConfidenceGridSpec& grid = {},
                                   const std::optional<Eigen::MatrixXd>& tau_bounds = std::nullopt);

}  // namespace codetune

#endif
