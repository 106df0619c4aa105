#ifndef CODETUNE_DATA_HPP
#define CODETUNE_DATA_HPP

#include <Eigen/Dense>
#include <optional>

#include "codetune/kernel.hpp"

namespace codetune {

/// Relative diagonal jitter added to every self-covariance matrix before
/// factorization; Gaussian correlation matrices are frequently near-singular.
inline constexpr double kCovarianceJitter = 1e-10;

/// Deterministic simulator runs: tuning-variable columns T (n_C x q), control
/// columns X (n_C x p) and noiseless responses y_C. Immutable after
/// construction.
class ComputerData {
 public:
  ComputerData(Eigen::MatrixXd t_inputs, Eigen::MatrixXd x_inputs, Eigen::VectorXd responses);

  const Eigen::MatrixXd& t_inputs() const { return t_; }
  const Eigen::MatrixXd& x_inputs() const { return x_; }
  const Eigen::VectorXd& responses() const { return y_; }
  Eigen::Index n() const { return y_.size(); }
  Eigen::Index q() const { return t_.cols(); }
  Eigen::Index p() const { return x_.cols(); }

  /// Full input matrix [T | X], n_C x (q+p).
  Eigen::MatrixXd inputs() const;

 private:
  Eigen::MatrixXd t_, x_;
  Eigen::VectorXd y_;
};

/// Noisy field observations: control inputs (n_E x p) and responses y_E. The
/// tuning columns of its design matrix are unknown and filled in per candidate
/// tau at evaluation time.
class ExperimentalData {
 public:
  ExperimentalData(Eigen::MatrixXd x_inputs, Eigen::VectorXd responses);

  const Eigen::MatrixXd& x_inputs() const { return x_; }
  const Eigen::VectorXd& responses() const { return y_; }
  Eigen::Index n() const { return y_.size(); }
  Eigen::Index p() const { return x_.cols(); }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

/// Noise-to-process variance ratios for the two data blocks. gamma_c stays 0
/// in every shipped configuration (the simulator is deterministic).
struct VarianceRatios {
  double gamma_c = 0.0;
  double gamma_e = 0.0;
};

/// Paired computer and experimental data with consistent dimensions
/// (p matches, n_E >= q + 1 so the F-based region has positive dof).
class CalibrationDataset {
 public:
  CalibrationDataset(ComputerData comp, ExperimentalData exp);

  const ComputerData& comp() const { return comp_; }
  const ExperimentalData& exp() const { return exp_; }
  Eigen::Index q() const { return comp_.q(); }
  Eigen::Index p() const { return comp_.p(); }

  /// Experimental design rows for a candidate tau; validates tau length.
  Eigen::MatrixXd experimental_inputs(const Eigen::VectorXd& tau) const;

 private:
  ComputerData comp_;
  ExperimentalData exp_;
};

/// Rows (tau_1..tau_q, x_1..x_p): tau constant down each column, controls from
/// the data. No dimension check against any companion computer data.
Eigen::MatrixXd assemble_experimental_inputs(const ExperimentalData& exp,
                                             const Eigen::VectorXd& tau);

/// First-order regression basis: row (1, z_1, ..., z_d) per input row.
Eigen::MatrixXd first_order_basis(const Eigen::MatrixXd& X);

/// Stacked design for the combined data, computer rows first.
struct CombinedData {
  Eigen::MatrixXd X;  // n_B x (q+p)
  Eigen::MatrixXd F;  // n_B x (1+q+p)
  Eigen::VectorXd y;  // n_B
  Eigen::Index n_comp = 0;
};

CombinedData assemble_combined(const ComputerData& comp, const ExperimentalData& exp,
                               const Eigen::VectorXd& tau);

/// Self-covariance over the rows of X whose first n_comp rows are computer
/// rows: sigma2 * (R + diag(gamma_c I, gamma_e I) + jitter I).
Eigen::MatrixXd assemble_covariance(const Eigen::MatrixXd& X, Eigen::Index n_comp,
                                    const KernelSpec& kernel, double sigma2,
                                    const VarianceRatios& ratios,
                                    double jitter = kCovarianceJitter);

/// Cross-covariance sigma2 * R(A, B); no noise or jitter terms.
Eigen::MatrixXd assemble_covariance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                    const KernelSpec& kernel, double sigma2);

/// Combined design matrices together with the block covariance.
struct DesignMatrixSet {
  Eigen::MatrixXd X;
  Eigen::MatrixXd F;
  Eigen::VectorXd y;
  Eigen::MatrixXd V;
  Eigen::Index n_comp = 0;
};

DesignMatrixSet assemble_design_set(const ComputerData& comp, const ExperimentalData& exp,
                                    const Eigen::VectorXd& tau, const KernelSpec& kernel,
                                    double sigma2, const VarianceRatios& ratios,
                                    double jitter = kCovarianceJitter);

/// Which responses a fit standardizes against.
enum class ResponseScope { kComputerOnly, kCombined };

/// Affine input map to [0,1] per coordinate plus response centering/scaling.
/// The common-theta kernel shares one rate across coordinates, which is only
/// meaningful on a common scale. Tuning coordinates use supplied bounds when
/// given, otherwise the computer T column ranges; control coordinates use the
/// min/max over both data sources.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd input_lo, Eigen::VectorXd input_hi, double y_mean, double y_scale);

  static Standardizer from_dataset(const ComputerData& comp, const ExperimentalData* exp,
                                   const std::optional<Eigen::MatrixXd>& tau_bounds,
                                   ResponseScope scope);
  /// Input-only map over explicit ranges (d x 2), responses left untouched.
  static Standardizer from_ranges(const Eigen::MatrixXd& ranges);

  Eigen::MatrixXd map_inputs(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd map_point(const Eigen::VectorXd& x) const;
  double map_response(double y) const { return (y - y_mean_) / y_scale_; }
  Eigen::VectorXd map_responses(const Eigen::VectorXd& y) const;
  double unmap_response(double z) const { return y_mean_ + y_scale_ * z; }
  double response_scale() const { return y_scale_; }
  double response_mean() const { return y_mean_; }
  Eigen::Index dim() const { return lo_.size(); }

 private:
  Eigen::VectorXd lo_, width_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

}  // namespace codetune

#endif
