// Independent brute-force implementations used as test oracles. Everything in
// this header is deliberately written with explicit inverses, determinants and
// quadrature so it shares no code path with the library.
#ifndef CODETUNE_TESTS_ORACLES_HPP
#define CODETUNE_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>

#include "codetune/rng.hpp"

namespace oracles {

/// Concentrated -2 log likelihood by dense inverse and determinant:
/// beta and sigma2 plugged in, constants n log(2 pi) + n dropped.
inline double mvn_neg2loglik_explicit(const Eigen::MatrixXd& V, const Eigen::MatrixXd& F,
                                      const Eigen::VectorXd& y) {
  const Eigen::MatrixXd v_inv = V.inverse();
  const Eigen::MatrixXd gram = F.transpose() * v_inv * F;
  const Eigen::VectorXd beta = gram.inverse() * (F.transpose() * (v_inv * y));
  const Eigen::VectorXd r = y - F * beta;
  const double n = static_cast<double>(y.size());
  const double s2 = r.dot(v_inv * r) / n;
  return n * std::log(s2) + std::log(V.determinant());
}

/// Joint-Gaussian block conditioning with explicit inverses (computer rows
/// first): mean and covariance of the second block given the first.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> condition_explicit(
    const Eigen::MatrixXd& V, Eigen::Index n_comp, const Eigen::MatrixXd& F,
    const Eigen::VectorXd& beta, const Eigen::VectorXd& y_comp) {
  const Eigen::Index n_exp = V.rows() - n_comp;
  const Eigen::MatrixXd v_cc_inv = V.topLeftCorner(n_comp, n_comp).inverse();
  const Eigen::MatrixXd v_ec = V.bottomLeftCorner(n_exp, n_comp);
  const Eigen::VectorXd mean =
      F.bottomRows(n_exp) * beta + v_ec * v_cc_inv * (y_comp - F.topRows(n_comp) * beta);
  const Eigen::MatrixXd cov =
      V.bottomRightCorner(n_exp, n_exp) - v_ec * v_cc_inv * V.topRightCorner(n_comp, n_exp);
  return {mean, cov};
}

/// Ordinary least squares through the normal equations with explicit inverse.
inline Eigen::VectorXd ols_explicit(const Eigen::MatrixXd& F, const Eigen::VectorXd& y) {
  return (F.transpose() * F).inverse() * (F.transpose() * y);
}

/// GLS with an explicitly inverted covariance.
inline Eigen::VectorXd gls_explicit(const Eigen::MatrixXd& F, const Eigen::MatrixXd& V,
                                    const Eigen::VectorXd& y) {
  const Eigen::MatrixXd v_inv = V.inverse();
  return (F.transpose() * v_inv * F).inverse() * (F.transpose() * (v_inv * y));
}

/// Universal-kriging MSEP at x0 by explicit inverses: conditional variance of
/// the joint Gaussian plus the GLS-mean uncertainty term.
inline double kriging_msep_explicit(const Eigen::MatrixXd& V, const Eigen::VectorXd& v0,
                                    double v00, const Eigen::MatrixXd& F,
                                    const Eigen::VectorXd& f0) {
  const Eigen::MatrixXd v_inv = V.inverse();
  const Eigen::VectorXd u = f0 - F.transpose() * (v_inv * v0);
  const Eigen::MatrixXd gram_inv = (F.transpose() * v_inv * F).inverse();
  return v00 - v0.dot(v_inv * v0) + u.dot(gram_inv * u);
}

/// F-distribution density.
inline double f_density(double x, int d1, int d2) {
  if (x <= 0.0) return 0.0;
  const double a = 0.5 * d1, b = 0.5 * d2;
  const double log_b = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double logf = a * std::log(static_cast<double>(d1) / d2) + (a - 1.0) * std::log(x) -
                      (a + b) * std::log1p(static_cast<double>(d1) / d2 * x) - log_b;
  return std::exp(logf);
}

/// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double fm, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, fm, flm, 0.5 * eps, depth - 1) +
         simpson(f, m, b, fm, fb, frm, 0.5 * eps, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-12) {
  const double m = 0.5 * (a + b);
  return simpson(f, a, b, f(a), f(b), f(m), eps, 50);
}

/// F CDF by quadrature of the density.
inline double f_cdf_quadrature(double x, int d1, int d2) {
  if (x <= 0.0) return 0.0;
  auto dens = [=](double t) { return f_density(t, d1, d2); };
  return integrate(dens, 0.0, x, 1e-12);
}

/// Upper-alpha F quantile by bisection on the quadrature CDF.
inline double f_quantile_quadrature(double alpha, int d1, int d2) {
  const double target = 1.0 - alpha;
  double lo = 0.0, hi = 1.0;
  while (f_cdf_quadrature(hi, d1, d2) < target) hi *= 2.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f_cdf_quadrature(mid, d1, d2) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Random helper matrices for oracle instances.
inline Eigen::MatrixXd random_matrix(codetune::RngStream& rng, Eigen::Index rows,
                                     Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Eigen::VectorXd random_vector(codetune::RngStream& rng, Eigen::Index n, double lo = 0.0,
                                     double hi = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

}  // namespace oracles

#endif
