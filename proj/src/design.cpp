#include "codetune/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "codetune/parallel.hpp"

namespace codetune {

namespace {

void validate_ranges(const Eigen::MatrixXd& ranges) {
  if (ranges.cols() != 2 || ranges.rows() < 1)
    throw std::invalid_argument("design: ranges must be d x 2");
  if (((ranges.col(1) - ranges.col(0)).array() <= 0.0).any())
    throw std::invalid_argument("design: each range needs lower < upper");
}

Eigen::MatrixXd random_lhs(int n, const Eigen::MatrixXd& ranges, RngStream& rng) {
  const Eigen::Index d = ranges.rows();
  Eigen::MatrixXd x(n, d);
  std::vector<int> perm(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
    const double lo = ranges(j, 0);
    const double w = ranges(j, 1) - ranges(j, 0);
    for (int i = 0; i < n; ++i) x(i, j) = lo + w * ((perm[i] + rng.uniform()) / n);
  }
  return x;
}

double min_pairwise_unit_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& ranges) {
  const Eigen::ArrayXd w = (ranges.col(1) - ranges.col(0)).array();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      const double d = ((x.row(i) - x.row(j)).transpose().array() / w).matrix().norm();
      best = std::min(best, d);
    }
  return best;
}

KrigingPredictor conditioned_predictor(const VarianceModel& vm, const Eigen::MatrixXd& design_raw) {
  const Eigen::MatrixXd z = vm.input_map.map_inputs(design_raw);
  return KrigingPredictor::build(vm.kernel, z,
                                 Eigen::VectorXd::Constant(z.rows(), vm.gamma), vm.jitter);
}

Eigen::VectorXd msep_profile(const VarianceModel& vm, const Eigen::MatrixXd& design_raw,
                             const Eigen::MatrixXd& weights_raw) {
  if (weights_raw.rows() < 1) throw std::invalid_argument("design: empty weight set");
  if (design_raw.rows() == 0)
    return Eigen::VectorXd::Ones(weights_raw.rows());  // unconditioned process variance
  const KrigingPredictor pred = conditioned_predictor(vm, design_raw);
  return pred.msep_unit(vm.input_map.map_inputs(weights_raw));
}

}  // namespace

Eigen::MatrixXd lhs(const DesignSpec& spec, RngStream& rng) {
  if (spec.n_points < 1) throw std::invalid_argument("lhs: need at least one point");
  validate_ranges(spec.ranges);
  if (spec.scheme == LhsScheme::kRandom) return random_lhs(spec.n_points, spec.ranges, rng);

  if (spec.maximin_candidates < 1)
    throw std::invalid_argument("lhs: need at least one maximin candidate");
  Eigen::MatrixXd best;
  double best_dist = -1.0;
  for (int c = 0; c < spec.maximin_candidates; ++c) {
    Eigen::MatrixXd cand = random_lhs(spec.n_points, spec.ranges, rng);
    const double d = spec.n_points > 1 ? min_pairwise_unit_distance(cand, spec.ranges)
                                       : std::numeric_limits<double>::infinity();
    if (d > best_dist) {
      best_dist = d;
      best = std::move(cand);
    }
  }
  return best;
}

VarianceModel VarianceModel::prior(const Eigen::MatrixXd& ranges, GPModel model) {
  validate_ranges(ranges);
  VarianceModel vm;
  vm.kernel = model == GPModel::kCommonTheta
                  ? KernelSpec::common(0.5)
                  : KernelSpec::separable(Eigen::VectorXd::Constant(ranges.rows(), 0.5));
  vm.gamma = 0.001;
  vm.input_map = Standardizer::from_ranges(ranges);
  return vm;
}

VarianceModel VarianceModel::from_fit(const FittedGP& fitted) {
  VarianceModel vm;
  vm.kernel = fitted.kernel();
  vm.gamma = fitted.gamma_e();
  vm.input_map = fitted.standardizer();
  vm.jitter = fitted.jitter();
  return vm;
}

double imse(const VarianceModel& vm, const Eigen::MatrixXd& design_raw,
            const Eigen::MatrixXd& weights_raw) {
  return msep_profile(vm, design_raw, weights_raw).mean();
}

double imse(const FittedGP& fitted, const Eigen::MatrixXd& design_raw,
            const Eigen::MatrixXd& weights_raw) {
  return imse(VarianceModel::from_fit(fitted), design_raw, weights_raw);
}

double mmse(const VarianceModel& vm, const Eigen::MatrixXd& design_raw,
            const Eigen::MatrixXd& weights_raw) {
  return msep_profile(vm, design_raw, weights_raw).maxCoeff();
}

double mmse(const FittedGP& fitted, const Eigen::MatrixXd& weights_raw) {
  const VarianceModel vm = VarianceModel::from_fit(fitted);
  // Standardizer maps are affine, so the stored standardized design is exactly
  // the mapped training design.
  const KrigingPredictor pred = KrigingPredictor::build(
      vm.kernel, fitted.train_inputs(),
      Eigen::VectorXd::Constant(fitted.n_train(), vm.gamma), vm.jitter);
  return pred.msep_unit(vm.input_map.map_inputs(weights_raw)).maxCoeff();
}

SequentialDesignState augment_design(SequentialDesignState state, int n2,
                                     const Eigen::MatrixXd& pool_raw, int jobs) {
  if (n2 < 0) throw std::invalid_argument("augment_design: n2 must be nonnegative");
  if (n2 == 0) return state;
  if (pool_raw.rows() < n2)
    throw std::invalid_argument("augment_design: pool smaller than requested point count");
  if (state.weight_points.rows() < 1)
    throw std::invalid_argument("augment_design: state has no weight points");

  // The pool must not duplicate current design points (unit-cube tolerance).
  const Eigen::MatrixXd pool_z = state.variance.input_map.map_inputs(pool_raw);
  if (state.design.rows() > 0) {
    const Eigen::MatrixXd design_z = state.variance.input_map.map_inputs(state.design);
    for (Eigen::Index i = 0; i < pool_z.rows(); ++i)
      for (Eigen::Index j = 0; j < design_z.rows(); ++j)
        if ((pool_z.row(i) - design_z.row(j)).norm() < 1e-9)
          throw std::invalid_argument("augment_design: pool point " + std::to_string(i) +
                                      " coincides with the current design");
  }

  std::vector<bool> used(pool_raw.rows(), false);
  Eigen::MatrixXd design = state.design;
  for (int pick = 0; pick < n2; ++pick) {
    Eigen::MatrixXd trial(design.rows() + 1, pool_raw.cols());
    trial.topRows(design.rows()) = design;
    std::vector<double> score(pool_raw.rows(), std::numeric_limits<double>::infinity());
    parallel_for(pool_raw.rows(), jobs, [&](std::size_t c) {
      if (used[c]) return;
      Eigen::MatrixXd t = trial;
      t.row(design.rows()) = pool_raw.row(c);
      score[c] = imse(state.variance, t, state.weight_points);
    });
    const std::size_t best =
        std::min_element(score.begin(), score.end()) - score.begin();
    if (!std::isfinite(score[best]))
      throw std::runtime_error("augment_design: no usable pool point");
    used[best] = true;
    trial.row(design.rows()) = pool_raw.row(best);
    design = std::move(trial);
  }
  state.design = std::move(design);
  state.imse_history.push_back(imse(state.variance, state.design, state.weight_points));
  state.mmse_history.push_back(mmse(state.variance, state.design, state.weight_points));
  return state;
}

SequentialDesignState run_sequential(const DesignSpec& initial,
                                     const std::function<double(const Eigen::VectorXd&)>& simulator,
                                     double target_mmse, int stage_size, int max_stages,
                                     GPModel model, RngStream& rng,
                                     const SequentialExtras& extras) {
  if (max_stages < 1) throw std::invalid_argument("run_sequential: max_stages must be >= 1");
  if (stage_size < 1) throw std::invalid_argument("run_sequential: stage_size must be >= 1");
  validate_ranges(initial.ranges);
  const Eigen::Index d = initial.ranges.rows();

  SequentialDesignState state;
  state.target_mmse = target_mmse;
  state.variance = VarianceModel::prior(initial.ranges, model);
  state.design = lhs(initial, rng);
  state.weight_points.resize(extras.weight_count, d);
  for (Eigen::Index i = 0; i < state.weight_points.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      state.weight_points(i, j) = rng.uniform(initial.ranges(j, 0), initial.ranges(j, 1));

  auto collect = [&](int stage) {
    const Eigen::Index have = state.responses.size();
    state.responses.conservativeResize(state.design.rows());
    for (Eigen::Index i = have; i < state.design.rows(); ++i) {
      try {
        state.responses[i] = simulator(state.design.row(i).transpose());
      } catch (const std::exception& e) {
        throw std::runtime_error("run_sequential: simulator failed at stage " +
                                 std::to_string(stage) + ", point " + std::to_string(i) + ": " +
                                 e.what());
      }
      if (!std::isfinite(state.responses[i]))
        throw std::runtime_error("run_sequential: simulator returned non-finite value at stage " +
                                 std::to_string(stage) + ", point " + std::to_string(i));
    }
  };

  for (int stage = 1; stage <= max_stages; ++stage) {
    collect(stage);

    const Eigen::VectorXd& y = state.responses;
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().sum() /
                                std::max<Eigen::Index>(y.size() - 1, 1));
    const Standardizer std_map(initial.ranges.col(0), initial.ranges.col(1), mean,
                               sd > 0.0 ? sd : 1.0);
    state.fitted = fit_gp(std_map, TrainingSet::kComputerOnly, model, state.design, y,
                          state.design.rows(), Eigen::VectorXd(), extras.fit);
    state.variance = VarianceModel::from_fit(*state.fitted);

    state.imse_history.push_back(imse(state.variance, state.design, state.weight_points));
    state.mmse_history.push_back(mmse(state.variance, state.design, state.weight_points));
    if (state.mmse_history.back() <= target_mmse) {
      state.reached_target = true;
      break;
    }
    if (stage == max_stages) break;

    // Candidate pool for the next stage; drop points that collide with the
    // current design.
    DesignSpec pool_spec{extras.pool_size, initial.ranges, LhsScheme::kRandom, 1};
    Eigen::MatrixXd pool = lhs(pool_spec, rng);
    const Eigen::MatrixXd pool_z = state.variance.input_map.map_inputs(pool);
    const Eigen::MatrixXd design_z = state.variance.input_map.map_inputs(state.design);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
      bool clash = false;
      for (Eigen::Index j = 0; j < design_z.rows() && !clash; ++j)
        clash = (pool_z.row(i) - design_z.row(j)).norm() < 1e-9;
      if (!clash) keep.push_back(i);
    }
    Eigen::MatrixXd pool_ok(keep.size(), d);
    for (std::size_t i = 0; i < keep.size(); ++i) pool_ok.row(i) = pool.row(keep[i]);

    // Greedy growth; histories here track stages, so drop the entries the
    // augmentation helper appends.
    SequentialDesignState grown = augment_design(std::move(state), stage_size, pool_ok, extras.jobs);
    grown.imse_history.pop_back();
    grown.mmse_history.pop_back();
    state = std::move(grown);
  }
  return state;
}

}  // namespace codetune
