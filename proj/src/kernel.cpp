#include "codetune/kernel.hpp"

#include <stdexcept>
#include <string>

namespace codetune {

namespace {

void validate(const KernelSpec& spec, Eigen::Index d) {
  if (spec.theta.size() == 0) throw std::invalid_argument("kernel: empty theta");
  if ((spec.theta.array() < 0.0).any() || !spec.theta.allFinite())
    throw std::invalid_argument("kernel: theta must be finite and nonnegative");
  if (spec.kind == GPModel::kCommonTheta && spec.theta.size() != 1)
    throw std::invalid_argument("kernel: common-theta model takes a single rate");
  if (spec.kind == GPModel::kSeparableTheta && spec.theta.size() != d)
    throw std::invalid_argument("kernel: separable model needs one rate per coordinate, expected " +
                                std::to_string(d) + " got " + std::to_string(spec.theta.size()));
}

}  // namespace

KernelSpec KernelSpec::common(double theta) {
  KernelSpec s;
  s.kind = GPModel::kCommonTheta;
  s.theta = Eigen::VectorXd::Constant(1, theta);
  return s;
}

KernelSpec KernelSpec::separable(Eigen::VectorXd theta) {
  KernelSpec s;
  s.kind = GPModel::kSeparableTheta;
  s.theta = std::move(theta);
  return s;
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& t, const Eigen::VectorXd& u) {
  if (t.size() != u.size()) throw std::invalid_argument("kernel_eval: point dimension mismatch");
  validate(spec, t.size());
  const Eigen::ArrayXd d2 = (t - u).array().square();
  const double expo = spec.kind == GPModel::kCommonTheta
                          ? spec.theta[0] * d2.sum()
                          : (spec.theta.array() * d2).sum();
  return std::exp(-expo);
}

Eigen::MatrixXd correlation_matrix(const KernelSpec& spec, const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) throw std::invalid_argument("correlation_matrix: column mismatch");
  validate(spec, A.cols());

  // Scale coordinates by sqrt(theta_i) so both models reduce to plain squared
  // distances.
  Eigen::ArrayXd w = spec.kind == GPModel::kCommonTheta
                         ? Eigen::ArrayXd::Constant(A.cols(), spec.theta[0])
                         : Eigen::ArrayXd(spec.theta.array());
  const Eigen::ArrayXd sw = w.sqrt();
  Eigen::MatrixXd As = A.array().rowwise() * sw.transpose();
  Eigen::MatrixXd Bs = B.array().rowwise() * sw.transpose();

  const Eigen::VectorXd a2 = As.rowwise().squaredNorm();
  const Eigen::VectorXd b2 = Bs.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = a2.replicate(1, Bs.rows()) + b2.transpose().replicate(As.rows(), 1) -
                       2.0 * (As * Bs.transpose());
  return (-d2.array().max(0.0)).exp();
}

}  // namespace codetune
