#ifndef CODETUNE_BENCH_HPP
#define CODETUNE_BENCH_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codetune/calibrate.hpp"
#include "codetune/data.hpp"

namespace codetune {

/// One of the seven closed-form toy simulators. Functions 1-5 are exact
/// (no model bias); 6 and 7 add a bias term b(x) to the experimental truth.
struct TestFunction {
  int id = 1;
  Eigen::Index q = 0;
  Eigen::Index p = 0;
  Eigen::VectorXd tau_star;   // generating values
  Eigen::MatrixXd t_ranges;   // q x 2 uniform ranges for the computer T draws
  Eigen::MatrixXd x_ranges;   // p x 2 uniform ranges for the control draws
  double noise_sd = 0.0;      // sigma_e of the experimental error
  bool has_bias = false;
  int default_n_c = 30;
  int default_n_e = 30;
};

/// Registry lookup; throws on unknown id (valid ids are 1..7).
const TestFunction& test_function(int id);

/// Exact simulator value Y(tau, x). Throws on unknown id or a mathematical
/// domain violation (e.g. a nonpositive log argument).
double eval_test_function(int id, const Eigen::VectorXd& tau, const Eigen::VectorXd& x);

/// Model-bias term b(x); identically 0 for ids 1-5.
double test_function_bias(int id, const Eigen::VectorXd& x);

struct ToyDataOverrides {
  std::optional<double> noise_sd;  // override sigma_e (0 turns noise off)
  bool include_bias = true;
};

/// Seeded synthetic dataset: computer inputs (T, x) and experimental inputs x
/// by random Latin hypercube over the declared ranges; y_C noiseless,
/// y_E = Y(tau_star, x) + b(x) + N(0, sigma_e^2).
CalibrationDataset generate_toy_data(int id, int n_c, int n_e, std::uint64_t seed,
                                     const ToyDataOverrides& overrides = {});

/// Euclidean distance between estimate and truth; throws on length mismatch.
double distance(const Eigen::VectorXd& tau_hat, const Eigen::VectorXd& tau_star);

/// FNV-1a hash over the dataset bytes; used to verify that methods compared
/// within one repetition consumed identical data.
std::uint64_t dataset_hash(const CalibrationDataset& data);

struct BenchmarkCell {
  int function_id = 1;
  Method method = Method::kAnls;
  GPModel model = GPModel::kCommonTheta;
  Predictor variant = Predictor::kComputer;  // step-4 predictor for maxmin
  bool bias_correction = false;
};

struct BenchmarkMatrix {
  std::vector<int> function_ids;
  std::vector<Method> methods;
  std::vector<GPModel> models;
  /// Maxmin step-4 predictors to benchmark; other methods use their canonical
  /// predictor. Defaults to the combined-data one.
  std::vector<Predictor> variants{Predictor::kCombined};
  std::vector<bool> bias_flags{false};
  std::optional<int> n_c;  // default: per-function sizes
  std::optional<int> n_e;
  MaxMinConfig maxmin{};
  /// Fluctuation default: off for the exact functions 1-5, on for 6-7.
  std::optional<bool> fluctuation_override;
  CalibrateOptions calibrate{};
};

struct BenchmarkRecord {
  BenchmarkCell cell;
  int repetition = 0;
  bool failed = false;
  std::string error;
  Eigen::VectorXd tau_hat;
  double dist = 0.0;
  double rss_p = 0.0;
  std::optional<BiasConstants> bias;
  int iterations = 0;
  double wall_seconds = 0.0;
  std::uint64_t data_hash = 0;
};

struct CellSummary {
  BenchmarkCell cell;
  int repetitions = 0;
  int failures = 0;
  Eigen::VectorXd tau_mean, tau_sd;
  double dist_mean = 0.0;
  double dist_sd = 0.0;
  double mse = 0.0;  // dist_mean^2 + sum_i sd(tau_i)^2
  double rss_mean = 0.0;
  double rss_sd = 0.0;
  double wall_mean = 0.0;
};

/// Mean-rss improvement of a maxmin cell over its matching anls cell.
struct ImprovementEntry {
  int function_id = 1;
  GPModel model = GPModel::kCommonTheta;
  Predictor variant = Predictor::kCombined;
  bool bias_correction = false;
  double anls_mean = 0.0;
  double maxmin_mean = 0.0;
  double ri_percent = 0.0;
};

struct BenchmarkReport {
  std::uint64_t base_seed = 0;
  int repetitions = 0;
  std::vector<BenchmarkCell> cells;
  std::vector<BenchmarkRecord> records;
  std::vector<CellSummary> summaries;
  std::vector<ImprovementEntry> improvements;
};

/// Expands the matrix into cells (skipping meaningless combinations such as
/// bias-corrected likelihood methods) and runs every cell over `repetitions`
/// seeded datasets. Methods within one (function, repetition) consume the
/// identical dataset so comparisons are paired. Individual run failures are
/// recorded, not fatal. Deterministic given (matrix, repetitions, base_seed).
BenchmarkReport run_benchmark(const BenchmarkMatrix& matrix, int repetitions,
                              std::uint64_t base_seed, int jobs = 1);

}  // namespace codetune

#endif
