#include "codetune/data.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace codetune {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

}  // namespace

ComputerData::ComputerData(Eigen::MatrixXd t_inputs, Eigen::MatrixXd x_inputs,
                           Eigen::VectorXd responses)
    : t_(std::move(t_inputs)), x_(std::move(x_inputs)), y_(std::move(responses)) {
  if (y_.size() < 1) throw std::invalid_argument("ComputerData: need at least one run");
  if (t_.rows() != y_.size() || x_.rows() != y_.size())
    throw std::invalid_argument("ComputerData: row counts disagree");
  require_finite(t_, "ComputerData.t_inputs");
  require_finite(x_, "ComputerData.x_inputs");
  require_finite(y_, "ComputerData.responses");
}

Eigen::MatrixXd ComputerData::inputs() const {
  Eigen::MatrixXd out(n(), q() + p());
  out << t_, x_;
  return out;
}

ExperimentalData::ExperimentalData(Eigen::MatrixXd x_inputs, Eigen::VectorXd responses)
    : x_(std::move(x_inputs)), y_(std::move(responses)) {
  if (x_.rows() != y_.size())
    throw std::invalid_argument("ExperimentalData: row counts disagree");
  require_finite(x_, "ExperimentalData.x_inputs");
  require_finite(y_, "ExperimentalData.responses");
}

CalibrationDataset::CalibrationDataset(ComputerData comp, ExperimentalData exp)
    : comp_(std::move(comp)), exp_(std::move(exp)) {
  if (comp_.p() != exp_.p())
    throw std::invalid_argument("CalibrationDataset: control dimension mismatch, computer p=" +
                                std::to_string(comp_.p()) + " experimental p=" +
                                std::to_string(exp_.p()));
  if (exp_.n() < comp_.q() + 1)
    throw std::invalid_argument("CalibrationDataset: need n_E >= q+1 = " +
                                std::to_string(comp_.q() + 1) + " experimental rows, got " +
                                std::to_string(exp_.n()));
}

Eigen::MatrixXd CalibrationDataset::experimental_inputs(const Eigen::VectorXd& tau) const {
  if (tau.size() != q())
    throw std::invalid_argument("experimental_inputs: expected tau of length q=" +
                                std::to_string(q()) + ", got " + std::to_string(tau.size()));
  return assemble_experimental_inputs(exp_, tau);
}

Eigen::MatrixXd assemble_experimental_inputs(const ExperimentalData& exp,
                                             const Eigen::VectorXd& tau) {
  if (!tau.allFinite()) throw std::invalid_argument("assemble_experimental_inputs: non-finite tau");
  const Eigen::Index n = exp.n();
  Eigen::MatrixXd out(n, tau.size() + exp.p());
  out.leftCols(tau.size()) = tau.transpose().replicate(n, 1);
  out.rightCols(exp.p()) = exp.x_inputs();
  return out;
}

Eigen::MatrixXd first_order_basis(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd f(X.rows(), X.cols() + 1);
  f.col(0).setOnes();
  f.rightCols(X.cols()) = X;
  return f;
}

CombinedData assemble_combined(const ComputerData& comp, const ExperimentalData& exp,
                               const Eigen::VectorXd& tau) {
  if (comp.p() != exp.p()) throw std::invalid_argument("assemble_combined: control dim mismatch");
  if (tau.size() != comp.q())
    throw std::invalid_argument("assemble_combined: expected tau of length q=" +
                                std::to_string(comp.q()));
  if (exp.n() < 1) throw std::invalid_argument("assemble_combined: empty experimental set");

  CombinedData out;
  out.n_comp = comp.n();
  const Eigen::Index n_b = comp.n() + exp.n();
  out.X.resize(n_b, comp.q() + comp.p());
  out.X.topRows(comp.n()) = comp.inputs();
  out.X.bottomRows(exp.n()) = assemble_experimental_inputs(exp, tau);
  out.F = first_order_basis(out.X);
  out.y.resize(n_b);
  out.y.head(comp.n()) = comp.responses();
  out.y.tail(exp.n()) = exp.responses();
  return out;
}

Eigen::MatrixXd assemble_covariance(const Eigen::MatrixXd& X, Eigen::Index n_comp,
                                    const KernelSpec& kernel, double sigma2,
                                    const VarianceRatios& ratios, double jitter) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("assemble_covariance: sigma2 must be positive");
  if (ratios.gamma_c < 0.0 || ratios.gamma_e < 0.0 || !std::isfinite(ratios.gamma_c) ||
      !std::isfinite(ratios.gamma_e))
    throw std::invalid_argument("assemble_covariance: variance ratios must be nonnegative");
  if (n_comp < 0 || n_comp > X.rows())
    throw std::invalid_argument("assemble_covariance: bad computer-row count");

  Eigen::MatrixXd r = correlation_matrix(kernel, X, X);
  r = 0.5 * (r + r.transpose().eval());  // exact symmetry
  r.diagonal().setOnes();
  r.diagonal().head(n_comp).array() += ratios.gamma_c;
  r.diagonal().tail(X.rows() - n_comp).array() += ratios.gamma_e;
  if (jitter > 0.0) r.diagonal().array() += jitter;
  return sigma2 * r;
}

Eigen::MatrixXd assemble_covariance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                    const KernelSpec& kernel, double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("assemble_covariance: sigma2 must be positive");
  return sigma2 * correlation_matrix(kernel, A, B);
}

DesignMatrixSet assemble_design_set(const ComputerData& comp, const ExperimentalData& exp,
                                    const Eigen::VectorXd& tau, const KernelSpec& kernel,
                                    double sigma2, const VarianceRatios& ratios, double jitter) {
  CombinedData c = assemble_combined(comp, exp, tau);
  DesignMatrixSet out;
  out.V = assemble_covariance(c.X, c.n_comp, kernel, sigma2, ratios, jitter);
  out.X = std::move(c.X);
  out.F = std::move(c.F);
  out.y = std::move(c.y);
  out.n_comp = c.n_comp;
  return out;
}

Standardizer::Standardizer(Eigen::VectorXd input_lo, Eigen::VectorXd input_hi, double y_mean,
                           double y_scale)
    : lo_(std::move(input_lo)), y_mean_(y_mean), y_scale_(y_scale) {
  if (lo_.size() != input_hi.size()) throw std::invalid_argument("Standardizer: range mismatch");
  width_ = input_hi - lo_;
  for (Eigen::Index i = 0; i < width_.size(); ++i) {
    if (!(width_[i] > 0.0)) width_[i] = 1.0;  // constant column: leave it unscaled
  }
  if (!(y_scale_ > 0.0)) y_scale_ = 1.0;
}

Standardizer Standardizer::from_dataset(const ComputerData& comp, const ExperimentalData* exp,
                                        const std::optional<Eigen::MatrixXd>& tau_bounds,
                                        ResponseScope scope) {
  const Eigen::Index q = comp.q();
  const Eigen::Index p = comp.p();
  Eigen::VectorXd lo(q + p), hi(q + p);
  for (Eigen::Index j = 0; j < q; ++j) {
    if (tau_bounds) {
      lo[j] = (*tau_bounds)(j, 0);
      hi[j] = (*tau_bounds)(j, 1);
    } else {
      lo[j] = comp.t_inputs().col(j).minCoeff();
      hi[j] = comp.t_inputs().col(j).maxCoeff();
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    lo[q + j] = comp.x_inputs().col(j).minCoeff();
    hi[q + j] = comp.x_inputs().col(j).maxCoeff();
    if (exp != nullptr && exp->n() > 0) {
      lo[q + j] = std::min(lo[q + j], exp->x_inputs().col(j).minCoeff());
      hi[q + j] = std::max(hi[q + j], exp->x_inputs().col(j).maxCoeff());
    }
  }

  Eigen::VectorXd y = comp.responses();
  if (scope == ResponseScope::kCombined && exp != nullptr && exp->n() > 0) {
    Eigen::VectorXd yb(comp.n() + exp->n());
    yb.head(comp.n()) = comp.responses();
    yb.tail(exp->n()) = exp->responses();
    y = std::move(yb);
  }
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().sum() / std::max<Eigen::Index>(y.size() - 1, 1));
  return Standardizer(std::move(lo), std::move(hi), mean, sd > 0.0 ? sd : 1.0);
}

Standardizer Standardizer::from_ranges(const Eigen::MatrixXd& ranges) {
  if (ranges.cols() != 2) throw std::invalid_argument("Standardizer: ranges must be d x 2");
  return Standardizer(ranges.col(0), ranges.col(1), 0.0, 1.0);
}

Eigen::MatrixXd Standardizer::map_inputs(const Eigen::MatrixXd& X) const {
  if (X.cols() != lo_.size()) throw std::invalid_argument("Standardizer: input dim mismatch");
  return (X.rowwise() - lo_.transpose()).array().rowwise() / width_.transpose().array();
}

Eigen::VectorXd Standardizer::map_point(const Eigen::VectorXd& x) const {
  if (x.size() != lo_.size()) throw std::invalid_argument("Standardizer: input dim mismatch");
  return (x - lo_).cwiseQuotient(width_);
}

Eigen::VectorXd Standardizer::map_responses(const Eigen::VectorXd& y) const {
  return (y.array() - y_mean_) / y_scale_;
}

}  // namespace codetune
