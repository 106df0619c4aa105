#include "codetune/gp.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace codetune {

namespace {

Eigen::MatrixXd lower_solve(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::MatrixXd& rhs) {
  return chol.matrixL().solve(rhs);
}

double log_det_from_chol(const Eigen::LLT<Eigen::MatrixXd>& chol) {
  return 2.0 * chol.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

Eigen::VectorXd gls_beta(const Eigen::MatrixXd& F, const Eigen::LLT<Eigen::MatrixXd>& chol_v,
                         const Eigen::VectorXd& y) {
  // Whiten by L^-1 and solve the normal equations by column-pivoted QR so rank
  // deficiency is detected instead of silently amplified.
  const Eigen::MatrixXd fw = lower_solve(chol_v, F);
  const Eigen::VectorXd yw = lower_solve(chol_v, y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fw);
  qr.setThreshold(1e-12);
  if (qr.rank() < F.cols()) throw std::runtime_error("gls_beta: singular GLS system");
  return qr.solve(yw);
}

ProfiledLikelihood profile_likelihood(const Eigen::MatrixXd& C, const Eigen::MatrixXd& F,
                                      const Eigen::VectorXd& y) {
  Eigen::LLT<Eigen::MatrixXd> chol(C);
  if (chol.info() != Eigen::Success)
    throw std::runtime_error("profile_likelihood: covariance not PD");
  ProfiledLikelihood out;
  out.beta = gls_beta(F, chol, y);
  const Eigen::VectorXd rw = lower_solve(chol, y - F * out.beta);
  const double n = static_cast<double>(y.size());
  out.sigma2 = rw.squaredNorm() / n;
  if (!(out.sigma2 > 0.0)) out.sigma2 = std::numeric_limits<double>::min();
  out.neg2loglik = n * std::log(out.sigma2) + log_det_from_chol(chol);
  return out;
}

LikelihoodValue concentrated_neg2loglik(const KernelSpec& kernel, double gamma_e,
                                        const CombinedData& data, double jitter) {
  if (gamma_e < 0.0 || !std::isfinite(gamma_e))
    throw std::invalid_argument("concentrated_neg2loglik: gamma_e must be nonnegative");
  const Eigen::MatrixXd C = assemble_covariance(data.X, data.n_comp, kernel, 1.0,
                                                VarianceRatios{0.0, gamma_e}, jitter);
  return LikelihoodValue{profile_likelihood(C, data.F, data.y).neg2loglik};
}

ConditionalMoments conditional_moments(const Eigen::MatrixXd& V, Eigen::Index n_comp,
                                       const Eigen::MatrixXd& F, const Eigen::VectorXd& beta,
                                       const Eigen::VectorXd& y_comp) {
  const Eigen::Index n_exp = V.rows() - n_comp;
  if (n_comp < 1 || n_exp < 1)
    throw std::invalid_argument("conditional_moments: need both blocks nonempty");
  if (y_comp.size() != n_comp)
    throw std::invalid_argument("conditional_moments: y_comp size mismatch");

  const Eigen::MatrixXd v_cc = V.topLeftCorner(n_comp, n_comp);
  const Eigen::MatrixXd v_ce = V.topRightCorner(n_comp, n_exp);
  const Eigen::MatrixXd v_ee = V.bottomRightCorner(n_exp, n_exp);
  const Eigen::MatrixXd f_c = F.topRows(n_comp);
  const Eigen::MatrixXd f_e = F.bottomRows(n_exp);

  Eigen::LLT<Eigen::MatrixXd> chol(v_cc);
  if (chol.info() != Eigen::Success)
    throw std::runtime_error("conditional_moments: computer covariance block not PD");
  const Eigen::MatrixXd a = lower_solve(chol, v_ce);            // L^-1 V_CE
  const Eigen::VectorXd b = lower_solve(chol, y_comp - f_c * beta);

  ConditionalMoments out;
  out.mean = f_e * beta + a.transpose() * b;
  out.cov = v_ee - a.transpose() * a;
  out.cov = 0.5 * (out.cov + out.cov.transpose().eval());
  return out;
}

KrigingPredictor KrigingPredictor::build(const KernelSpec& kernel, Eigen::MatrixXd X,
                                         const Eigen::VectorXd& gamma, double jitter) {
  if (gamma.size() != X.rows())
    throw std::invalid_argument("KrigingPredictor: gamma size mismatch");
  KrigingPredictor out;
  out.kernel_ = kernel;
  Eigen::MatrixXd c = correlation_matrix(kernel, X, X);
  c = 0.5 * (c + c.transpose().eval());
  c.diagonal().setOnes();
  c.diagonal() += gamma;
  c.diagonal().array() += jitter;
  out.chol_.compute(c);
  if (out.chol_.info() != Eigen::Success)
    throw std::runtime_error("KrigingPredictor: covariance not PD");
  out.x_ = std::move(X);
  out.f_ = first_order_basis(out.x_);
  out.c_inv_f_ = out.chol_.solve(out.f_);
  Eigen::MatrixXd gram = out.f_.transpose() * out.c_inv_f_;
  gram = 0.5 * (gram + gram.transpose().eval());
  out.gram_chol_.compute(gram);
  if (out.gram_chol_.info() != Eigen::Success)
    throw std::runtime_error("KrigingPredictor: singular GLS system");
  return out;
}

void KrigingPredictor::attach_responses(const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  if (y.size() != x_.rows() || beta.size() != f_.cols())
    throw std::invalid_argument("KrigingPredictor: response/beta size mismatch");
  beta_ = beta;
  resid_weights_ = chol_.solve(y - f_ * beta);
}

double KrigingPredictor::mean(const Eigen::VectorXd& z0) const {
  if (resid_weights_.size() == 0) throw std::logic_error("KrigingPredictor: no responses attached");
  const Eigen::MatrixXd r0 = correlation_matrix(kernel_, z0.transpose(), x_);
  double f0b = beta_[0] + z0.dot(beta_.tail(z0.size()));
  return f0b + (r0 * resid_weights_)(0);
}

Eigen::VectorXd KrigingPredictor::mean(const Eigen::MatrixXd& Z0) const {
  if (resid_weights_.size() == 0) throw std::logic_error("KrigingPredictor: no responses attached");
  const Eigen::MatrixXd r0 = correlation_matrix(kernel_, Z0, x_);
  return first_order_basis(Z0) * beta_ + r0 * resid_weights_;
}

double KrigingPredictor::msep_unit(const Eigen::VectorXd& z0) const {
  const Eigen::MatrixXd r0t = correlation_matrix(kernel_, x_, z0.transpose());  // n x 1
  const Eigen::VectorXd r0 = r0t.col(0);
  const Eigen::VectorXd a = chol_.matrixL().solve(r0);
  Eigen::VectorXd f0(f_.cols());
  f0[0] = 1.0;
  f0.tail(z0.size()) = z0;
  const Eigen::VectorXd u = f0 - c_inv_f_.transpose() * r0;
  const double gls_term = u.dot(gram_chol_.solve(u));
  return std::max(0.0, 1.0 - a.squaredNorm() + gls_term);
}

Eigen::VectorXd KrigingPredictor::msep_unit(const Eigen::MatrixXd& Z0) const {
  const Eigen::MatrixXd r0 = correlation_matrix(kernel_, x_, Z0);      // n x K
  const Eigen::MatrixXd a = chol_.matrixL().solve(r0);                 // L^-1 R0
  const Eigen::MatrixXd u = first_order_basis(Z0).transpose() - c_inv_f_.transpose() * r0;
  const Eigen::MatrixXd gu = gram_chol_.solve(u);
  Eigen::VectorXd out(Z0.rows());
  for (Eigen::Index k = 0; k < Z0.rows(); ++k) {
    out[k] = std::max(0.0, 1.0 - a.col(k).squaredNorm() + u.col(k).dot(gu.col(k)));
  }
  return out;
}

FittedGP FittedGP::at_hyperparameters(const Standardizer& std, TrainingSet training,
                                      const KernelSpec& kernel, double gamma_e,
                                      const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                                      Eigen::Index n_comp, Eigen::VectorXd tau_hat,
                                      double max_jitter) {
  if (X_raw.rows() != y_raw.size()) throw std::invalid_argument("FittedGP: row count mismatch");
  const Eigen::Index n = X_raw.rows();
  const Eigen::Index n_exp = n - n_comp;
  if (training == TrainingSet::kComputerOnly && n_exp != 0)
    throw std::invalid_argument("FittedGP: computer-only fit given experimental rows");

  FittedGP out;
  out.kernel_ = kernel;
  out.gamma_e_ = gamma_e;
  out.training_ = training;
  out.tau_hat_ = std::move(tau_hat);
  out.std_ = std;
  out.n_comp_ = n_comp;

  const Eigen::MatrixXd Z = std.map_inputs(X_raw);
  out.y_std_ = std.map_responses(y_raw);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(n);
  gamma.tail(n_exp).array() = gamma_e;

  // The final predictor takes the smallest jitter that still factorizes:
  // at zero the computer predictor interpolates its noiseless runs exactly,
  // which a fixed jitter would visibly violate on large-scale responses.
  std::vector<double> ladder = {0.0, 1e-12, max_jitter, 1e-8, 1e-6};
  std::sort(ladder.begin(), ladder.end());
  ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());
  bool built = false;
  for (double jitter : ladder) {
    try {
      out.main_ = KrigingPredictor::build(kernel, Z, gamma, jitter);
      if (training == TrainingSet::kCombined && n_comp >= 1)
        out.comp_block_ = KrigingPredictor::build(kernel, Z.topRows(n_comp),
                                                  Eigen::VectorXd::Zero(n_comp), jitter);
      out.jitter_ = jitter;
      built = true;
      break;
    } catch (const std::runtime_error&) {
      continue;
    }
  }
  if (!built) throw std::runtime_error("FittedGP: covariance not PD at any jitter level");

  ProfiledLikelihood prof;
  prof.beta = gls_beta(out.main_.basis(), out.main_.chol(), out.y_std_);
  {
    const Eigen::VectorXd rw =
        out.main_.chol().matrixL().solve(out.y_std_ - out.main_.basis() * prof.beta);
    prof.sigma2 = rw.squaredNorm() / static_cast<double>(n);
    if (!(prof.sigma2 > 0.0)) prof.sigma2 = std::numeric_limits<double>::min();
    prof.neg2loglik = n * std::log(prof.sigma2) + log_det_from_chol(out.main_.chol());
  }
  out.beta_ = prof.beta;
  out.sigma2_ = prof.sigma2;
  out.neg2loglik_ = prof.neg2loglik;
  out.main_.attach_responses(out.y_std_, out.beta_);
  if (training == TrainingSet::kCombined && n_comp >= 1)
    out.comp_block_.attach_responses(out.y_std_.head(n_comp), out.beta_);
  return out;
}

namespace {

void check_variant(TrainingSet training, Predictor variant) {
  const bool ok = (variant == Predictor::kComputer && training == TrainingSet::kComputerOnly) ||
                  (variant != Predictor::kComputer && training == TrainingSet::kCombined);
  if (!ok)
    throw std::invalid_argument(
        "predict: predictor variant incompatible with the GP's training set");
}

}  // namespace

KrigingPredictor FittedGP::anchored_at(const Eigen::VectorXd& tau_std) const {
  const Eigen::Index q = tau_hat_.size();
  const Eigen::Index n = main_.n();
  const Eigen::Index n_exp = n - n_comp_;
  Eigen::MatrixXd z = main_.design();
  z.block(n_comp_, 0, n_exp, q) = tau_std.transpose().replicate(n_exp, 1);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(n);
  gamma.tail(n_exp).setConstant(gamma_e_);
  const double ladder[] = {jitter_, 1e-10, 1e-8, 1e-6};
  for (double jit : ladder) {
    if (jit < jitter_) continue;
    try {
      KrigingPredictor p = KrigingPredictor::build(kernel_, z, gamma, jit);
      p.attach_responses(y_std_, beta_);
      return p;
    } catch (const std::runtime_error&) {
    }
  }
  throw std::runtime_error("predict: anchored covariance not PD");
}

const KrigingPredictor& FittedGP::pick(Predictor variant) const {
  return variant == Predictor::kComputerFromCombined ? comp_block_ : main_;
}

double FittedGP::predict(const Eigen::VectorXd& x0_raw, Predictor variant) const {
  check_variant(training_, variant);
  const Eigen::VectorXd z0 = std_.map_point(x0_raw);
  const Eigen::Index q = tau_hat_.size();
  if (variant == Predictor::kCombined && q > 0 && main_.n() > n_comp_) {
    return std_.unmap_response(anchored_at(z0.head(q)).mean(z0));
  }
  return std_.unmap_response(pick(variant).mean(z0));
}

Eigen::VectorXd FittedGP::predict(const Eigen::MatrixXd& X0_raw, Predictor variant) const {
  check_variant(training_, variant);
  const Eigen::MatrixXd Z0 = std_.map_inputs(X0_raw);
  const Eigen::Index q = tau_hat_.size();
  Eigen::VectorXd out;
  if (variant == Predictor::kCombined && q > 0 && main_.n() > n_comp_) {
    // One anchored system when the whole batch shares a tuning value (the
    // residual-sum evaluations do); otherwise per-row systems.
    bool shared = true;
    for (Eigen::Index j = 0; j < q && shared; ++j)
      shared = (Z0.col(j).array() == Z0(0, j)).all();
    if (shared) {
      out = anchored_at(Z0.row(0).head(q).transpose()).mean(Z0);
    } else {
      out.resize(Z0.rows());
      for (Eigen::Index i = 0; i < Z0.rows(); ++i) {
        const Eigen::VectorXd z0 = Z0.row(i).transpose();
        out[i] = anchored_at(z0.head(q)).mean(z0);
      }
    }
  } else {
    out = pick(variant).mean(Z0);
  }
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = std_.unmap_response(out[i]);
  return out;
}

double FittedGP::predict_mse(const Eigen::VectorXd& x0_raw, Predictor variant) const {
  check_variant(training_, variant);
  const Eigen::VectorXd z0 = std_.map_point(x0_raw);
  const double scale = std_.response_scale();
  const Eigen::Index q = tau_hat_.size();
  if (variant == Predictor::kCombined && q > 0 && main_.n() > n_comp_) {
    return sigma2_ * scale * scale * anchored_at(z0.head(q)).msep_unit(z0);
  }
  return sigma2_ * scale * scale * pick(variant).msep_unit(z0);
}

double FittedGP::predict_trained(const Eigen::VectorXd& x0_raw) const {
  return std_.unmap_response(main_.mean(std_.map_point(x0_raw)));
}

FittedGP fit_gp(const Standardizer& std, TrainingSet training, GPModel model,
                const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw, Eigen::Index n_comp,
                Eigen::VectorXd tau_hat, const FitOptions& opts) {
  const Eigen::Index n = X_raw.rows();
  const Eigen::Index d = X_raw.cols();
  const Eigen::Index n_exp = n - n_comp;
  const bool estimate_gamma = training == TrainingSet::kCombined && n_exp > 0;
  const Eigen::Index n_theta = model == GPModel::kCommonTheta ? 1 : d;
  const Eigen::Index n_par = n_theta + (estimate_gamma ? 1 : 0);

  const Eigen::MatrixXd Z = std.map_inputs(X_raw);
  const Eigen::VectorXd ys = std.map_responses(y_raw);
  const Eigen::MatrixXd F = first_order_basis(Z);

  auto unpack = [&](const Eigen::VectorXd& v) {
    KernelSpec k = model == GPModel::kCommonTheta
                       ? KernelSpec::common(std::exp(v[0]))
                       : KernelSpec::separable(v.head(n_theta).array().exp());
    const double g = estimate_gamma ? std::exp(v[n_theta]) : 0.0;
    return std::make_pair(k, g);
  };

  auto objective = [&](const Eigen::VectorXd& v) -> double {
    const auto [kernel, gamma_e] = unpack(v);
    Eigen::MatrixXd c = correlation_matrix(kernel, Z, Z);
    c = 0.5 * (c + c.transpose().eval());
    c.diagonal().setOnes();
    c.diagonal().tail(n_exp).array() += gamma_e;
    c.diagonal().array() += opts.jitter;
    try {
      return profile_likelihood(c, F, ys).neg2loglik;
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  OptProblem prob;
  prob.objective = objective;
  prob.lower.resize(n_par);
  prob.upper.resize(n_par);
  prob.lower.head(n_theta).setConstant(std::log(opts.theta_lo));
  prob.upper.head(n_theta).setConstant(std::log(opts.theta_hi));
  if (estimate_gamma) {
    prob.lower[n_theta] = std::log(opts.gamma_lo);
    prob.upper[n_theta] = std::log(opts.gamma_hi);
  }
  // One fixed start at theta = 1 (and gamma_E = 0.01), the rest space-filling.
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n_par);
  if (estimate_gamma) fixed[n_theta] = std::log(0.01);
  prob.starts.push_back(fixed);
  for (auto& s : spacefill_starts(prob.lower, prob.upper, opts.multistart - 1))
    prob.starts.push_back(std::move(s));

  OptResult res = minimize(prob, opts.opt);
  const auto [kernel, gamma_e] = unpack(res.argmin);
  return FittedGP::at_hyperparameters(std, training, kernel, gamma_e, X_raw, y_raw, n_comp,
                                      std::move(tau_hat), opts.jitter);
}

FittedGP fit_mle(const CalibrationDataset& data, GPModel model, TrainingSet training,
                 const std::optional<Eigen::VectorXd>& tau_hat, const FitOptions& opts) {
  if (training == TrainingSet::kCombined) {
    if (!tau_hat) throw std::invalid_argument("fit_mle: combined training needs tau_hat");
    const Standardizer std = Standardizer::from_dataset(data.comp(), &data.exp(), opts.tau_bounds,
                                                        ResponseScope::kCombined);
    const CombinedData c = assemble_combined(data.comp(), data.exp(), *tau_hat);
    return fit_gp(std, training, model, c.X, c.y, c.n_comp, *tau_hat, opts);
  }
  const Standardizer std = Standardizer::from_dataset(data.comp(), &data.exp(), opts.tau_bounds,
                                                      ResponseScope::kComputerOnly);
  return fit_gp(std, training, model, data.comp().inputs(), data.comp().responses(),
                data.comp().n(), Eigen::VectorXd(), opts);
}

}  // namespace codetune
