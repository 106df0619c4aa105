#ifndef CODETUNE_DESIGN_HPP
#define CODETUNE_DESIGN_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "codetune/gp.hpp"
#include "codetune/rng.hpp"

namespace codetune {

enum class LhsScheme { kRandom, kMaximin };

struct DesignSpec {
  int n_points = 10;
  Eigen::MatrixXd ranges;  // d x 2, lower < upper per coordinate
  LhsScheme scheme = LhsScheme::kRandom;
  int maximin_candidates = 100;
};

/// Latin hypercube sample in raw coordinates: each coordinate gets exactly one
/// point per equal-width stratum, at a uniform position inside it. The maximin
/// scheme draws `maximin_candidates` such samples and keeps the one with the
/// largest minimum pairwise distance (measured on the unit cube).
Eigen::MatrixXd lhs(const DesignSpec& spec, RngStream& rng);

/// Prediction-variance model for design criteria. MSEP does not depend on the
/// trend coefficients or the process variance, only on the rates, the noise
/// ratio and the design, so experiments can be planned before any data exist.
struct VarianceModel {
  KernelSpec kernel;  // rates over unit-cube coordinates
  double gamma = 0.0;
  Standardizer input_map;  // raw -> unit cube
  double jitter = kCovarianceJitter;

  /// No-data default: rate 0.5 per active coordinate, noise ratio 0.001.
  static VarianceModel prior(const Eigen::MatrixXd& ranges, GPModel model);
  static VarianceModel from_fit(const FittedGP& fitted);
};

/// Mean unit-variance MSEP over the weight points for a GP conditioned on the
/// candidate design (responses are never needed). Empty design means the
/// unconditioned process variance, i.e. 1.
double imse(const VarianceModel& vm, const Eigen::MatrixXd& design_raw,
            const Eigen::MatrixXd& weight_points_raw);
double imse(const FittedGP& fitted, const Eigen::MatrixXd& design_raw,
            const Eigen::MatrixXd& weight_points_raw);

/// Max unit-variance MSEP over the weight points.
double mmse(const VarianceModel& vm, const Eigen::MatrixXd& design_raw,
            const Eigen::MatrixXd& weight_points_raw);
/// Evaluated on the fitted GP's own training design.
double mmse(const FittedGP& fitted, const Eigen::MatrixXd& weight_points_raw);

struct SequentialDesignState {
  Eigen::MatrixXd design;     // raw coordinates, grows stage by stage
  Eigen::VectorXd responses;  // collected simulator outputs
  std::optional<FittedGP> fitted;
  VarianceModel variance;
  Eigen::MatrixXd weight_points;  // raw coordinates, fixed for the run
  std::vector<double> imse_history;
  std::vector<double> mmse_history;
  double target_mmse = std::numeric_limits<double>::infinity();
  bool reached_target = false;
};

/// Greedy augmentation: picks n2 pool points one at a time, each minimizing
/// IMSE given the points already chosen (ties broken by pool order). The pool
/// must be disjoint from the current design and at least n2 points large.
/// Appends the post-augmentation IMSE/MMSE to the histories when n2 > 0.
SequentialDesignState augment_design(SequentialDesignState state, int n2,
                                     const Eigen::MatrixXd& pool_raw, int jobs = 1);

struct SequentialExtras {
  int pool_size = 500;     // random-LHS candidate pool per stage
  int weight_count = 1000; // weight points for the criteria
  FitOptions fit{};
  int jobs = 1;
};

/// Staged procedure: collect responses on the current design, refit the GP by
/// MLE, stop once MMSE falls below the target, otherwise greedily add
/// stage_size points and collect again. Histories carry one entry per
/// completed stage. Simulator failures propagate with stage context.
SequentialDesignState run_sequential(const DesignSpec& initial,
                                     const std::function<double(const Eigen::VectorXd&)>& simulator,
                                     double target_mmse, int stage_size, int max_stages,
                                     GPModel model, RngStream& rng,
                                     const SequentialExtras& extras = {});

}  // namespace codetune

#endif
