#ifndef CODETUNE_GP_HPP
#define CODETUNE_GP_HPP

#include <Eigen/Dense>
#include <optional>

#include "codetune/data.hpp"
#include "codetune/kernel.hpp"
#include "codetune/optimize.hpp"

namespace codetune {

/// Which rows a GP was trained on: the computer runs alone, or computer plus
/// experimental rows with the tuning columns frozen at some tau.
enum class TrainingSet { kComputerOnly, kCombined };

/// BLUP flavor used for prediction.
///   kComputer             computer-data coefficients and residuals
///   kCombined             combined-data coefficients and residuals; the
///                         experimental rows of the kriging system follow the
///                         tuning part of the prediction point (their design
///                         rows are functions of the unknown tau by
///                         construction), so only (theta, beta, gamma_E) stay
///                         frozen from the fit
///   kComputerFromCombined combined-data coefficients with computer-block
///                         residuals (ignores gamma_E)
enum class Predictor { kComputer, kCombined, kComputerFromCombined };

struct LikelihoodValue {
  double neg2loglik = 0.0;  // n log sigma2_hat + log|V|, constants dropped
};

/// GLS coefficients (F' V^-1 F)^-1 F' V^-1 y through triangular solves on the
/// supplied Cholesky factor; throws "singular GLS system" on rank deficiency.
Eigen::VectorXd gls_beta(const Eigen::MatrixXd& F, const Eigen::LLT<Eigen::MatrixXd>& chol_v,
                         const Eigen::VectorXd& y);

struct ProfiledLikelihood {
  double neg2loglik = 0.0;
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
};

/// Profiles beta and sigma2 out of the Gaussian likelihood of y ~ N(F beta,
/// sigma2 C): beta by GLS, sigma2 = r' C^-1 r / n, then returns
/// n log sigma2 + log|C|. Throws if C is not positive definite.
ProfiledLikelihood profile_likelihood(const Eigen::MatrixXd& C, const Eigen::MatrixXd& F,
                                      const Eigen::VectorXd& y);

/// Concentrated -2 log likelihood of the combined data at unit process
/// variance: covariance R(X,X) + diag(0, gamma_e I) + jitter I.
LikelihoodValue concentrated_neg2loglik(const KernelSpec& kernel, double gamma_e,
                                        const CombinedData& data,
                                        double jitter = kCovarianceJitter);

struct ConditionalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Moments of the experimental block given the computer block of a joint
/// Gaussian with mean F beta and covariance V (computer rows first):
/// mean = F_E beta + V_CE' V_CC^-1 (y_C - F_C beta),
/// cov  = V_EE - V_CE' V_CC^-1 V_CE.
ConditionalMoments conditional_moments(const Eigen::MatrixXd& V, Eigen::Index n_comp,
                                       const Eigen::MatrixXd& F, const Eigen::VectorXd& beta,
                                       const Eigen::VectorXd& y_comp);

/// Correlation-scale kriging structures for one fixed design: Cholesky of
/// C = R + diag(gamma) + jitter I plus the GLS gram factor. Response-free
/// so it also backs the prediction-variance design criteria.
class KrigingPredictor {
 public:
  KrigingPredictor() = default;

  /// gamma holds a per-row noise ratio added to the diagonal.
  static KrigingPredictor build(const KernelSpec& kernel, Eigen::MatrixXd X,
                                const Eigen::VectorXd& gamma, double jitter);

  void attach_responses(const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

  /// BLUP mean at standardized point z0 (requires attached responses).
  double mean(const Eigen::VectorXd& z0) const;
  Eigen::VectorXd mean(const Eigen::MatrixXd& Z0) const;

  /// Unit-variance MSEP: 1 - r0' C^-1 r0 + u' (F' C^-1 F)^-1 u, clamped at 0.
  double msep_unit(const Eigen::VectorXd& z0) const;
  /// Batched over the rows of Z0; one triangular solve for all points.
  Eigen::VectorXd msep_unit(const Eigen::MatrixXd& Z0) const;

  const Eigen::MatrixXd& design() const { return x_; }
  const Eigen::MatrixXd& basis() const { return f_; }
  const Eigen::LLT<Eigen::MatrixXd>& chol() const { return chol_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const Eigen::VectorXd& resid_weights() const { return resid_weights_; }
  Eigen::Index n() const { return x_.rows(); }

 private:
  KernelSpec kernel_;
  Eigen::MatrixXd x_, f_;
  Eigen::LLT<Eigen::MatrixXd> chol_;       // of C
  Eigen::MatrixXd c_inv_f_;                // C^-1 F
  Eigen::LLT<Eigen::MatrixXd> gram_chol_;  // of F' C^-1 F
  Eigen::VectorXd beta_;
  Eigen::VectorXd resid_weights_;          // C^-1 (y - F beta)
};

struct FitOptions {
  int multistart = 8;           // total starts, one fixed + space-filling rest
  OptOptions opt{};
  double theta_lo = 1e-4;       // rate box in standardized input units
  double theta_hi = 1e4;
  double gamma_lo = 1e-8;       // noise-ratio search floor
  double gamma_hi = 1e3;
  double jitter = kCovarianceJitter;
  std::optional<Eigen::MatrixXd> tau_bounds;  // q x 2, drives the input map
};

/// A GP with hyperparameters estimated by maximum likelihood, holding the
/// standardization used for the fit and every cached factor needed for cheap
/// repeated prediction. Immutable after construction; prediction is
/// const and safe to call concurrently.
class FittedGP {
 public:
  double predict(const Eigen::VectorXd& x0_raw, Predictor variant) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X0_raw, Predictor variant) const;
  double predict_mse(const Eigen::VectorXd& x0_raw, Predictor variant) const;

  /// BLUP of the system exactly as fitted (tau anchor untouched); used for
  /// residual diagnostics at the training points.
  double predict_trained(const Eigen::VectorXd& x0_raw) const;

  const KernelSpec& kernel() const { return kernel_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  double sigma2() const { return sigma2_; }
  double gamma_e() const { return gamma_e_; }
  double neg2loglik() const { return neg2loglik_; }
  TrainingSet training() const { return training_; }
  const Eigen::VectorXd& tau_hat() const { return tau_hat_; }
  const Standardizer& standardizer() const { return std_; }
  double jitter() const { return jitter_; }

  Eigen::Index n_train() const { return main_.n(); }
  Eigen::Index n_comp() const { return n_comp_; }
  /// Standardized training structures, exposed for verification.
  const Eigen::MatrixXd& train_inputs() const { return main_.design(); }
  const Eigen::MatrixXd& train_basis() const { return main_.basis(); }
  const Eigen::VectorXd& train_responses() const { return y_std_; }

  /// Builds all caches for fixed hyperparameters; inputs in raw units,
  /// computer rows first. Used by fit_gp and directly by tests that need a GP
  /// at pinned hyperparameters.
  static FittedGP at_hyperparameters(const Standardizer& std, TrainingSet training,
                                     const KernelSpec& kernel_std_space, double gamma_e,
                                     const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                                     Eigen::Index n_comp, Eigen::VectorXd tau_hat,
                                     double jitter = kCovarianceJitter);

 private:
  /// Kriging system with the experimental-row tuning columns moved to
  /// tau_std; coefficients stay at the fitted beta.
  KrigingPredictor anchored_at(const Eigen::VectorXd& tau_std) const;
  const KrigingPredictor& pick(Predictor variant) const;

  KernelSpec kernel_;
  Eigen::VectorXd beta_;
  double sigma2_ = 1.0;
  double gamma_e_ = 0.0;
  double neg2loglik_ = 0.0;
  double jitter_ = kCovarianceJitter;
  TrainingSet training_ = TrainingSet::kComputerOnly;
  Eigen::VectorXd tau_hat_;
  Standardizer std_;
  Eigen::Index n_comp_ = 0;
  Eigen::VectorXd y_std_;
  KrigingPredictor main_;
  KrigingPredictor comp_block_;  // combined fits only: computer block with
                                 // combined-data coefficients
};

/// MLE over log rates (and log gamma_E when experimental rows are present;
/// gamma_E is fixed at 0 for computer-only training). Multistart quasi-Newton;
/// deterministic, best objective wins with ties broken by start order.
/// Low-level entry: rows of X_raw are computer rows then experimental rows.
FittedGP fit_gp(const Standardizer& std, TrainingSet training, GPModel model,
                const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw, Eigen::Index n_comp,
                Eigen::VectorXd tau_hat, const FitOptions& opts = {});

/// High-level entry on a calibration dataset. Combined training requires the
/// tau the experimental rows are frozen at.
FittedGP fit_mle(const CalibrationDataset& data, GPModel model, TrainingSet training,
                 const std::optional<Eigen::VectorXd>& tau_hat = std::nullopt,
                 const FitOptions& opts = {});

}  // namespace codetune

#endif
