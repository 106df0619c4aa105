#ifndef CODETUNE_KERNEL_HPP
#define CODETUNE_KERNEL_HPP

#include <Eigen/Dense>

namespace codetune {

/// Gaussian correlation family. kCommonTheta uses one rate shared by every
/// coordinate, exp(-theta * sum_i |t_i-u_i|^2); kSeparableTheta uses one rate
/// per coordinate, exp(-sum_i theta_i |t_i-u_i|^2).
enum class GPModel { kCommonTheta, kSeparableTheta };

struct KernelSpec {
  GPModel kind = GPModel::kCommonTheta;
  Eigen::VectorXd theta;  // length 1 (common) or input dimension (separable)

  static KernelSpec common(double theta);
  static KernelSpec separable(Eigen::VectorXd theta);
};

/// Correlation between two points; value in (0, 1], symmetric in (t, u).
/// Throws if any rate is negative or dimensions are inconsistent.
double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& t, const Eigen::VectorXd& u);

/// Correlation matrix between the rows of A (n_a x d) and B (n_b x d).
Eigen::MatrixXd correlation_matrix(const KernelSpec& spec, const Eigen::MatrixXd& A,
                                   const Eigen::MatrixXd& B);

}  // namespace codetune

#endif
