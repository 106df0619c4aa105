#include "codetune/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "codetune/design.hpp"
#include "codetune/parallel.hpp"

namespace codetune {

namespace {

constexpr std::uint64_t kComputerLhsStream = 11;
constexpr std::uint64_t kExperimentalLhsStream = 12;
constexpr std::uint64_t kNoiseStream = 13;
constexpr std::uint64_t kDatasetStream = 101;
constexpr std::uint64_t kRunStream = 102;

Eigen::MatrixXd ranges(std::initializer_list<std::pair<double, double>> rs) {
  Eigen::MatrixXd m(rs.size(), 2);
  Eigen::Index i = 0;
  for (const auto& [lo, hi] : rs) {
    m(i, 0) = lo;
    m(i, 1) = hi;
    ++i;
  }
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> vs) {
  Eigen::VectorXd v(vs.size());
  Eigen::Index i = 0;
  for (double x : vs) v[i++] = x;
  return v;
}

std::vector<TestFunction> build_registry() {
  std::vector<TestFunction> fs;
  {
    TestFunction f;
    f.id = 1;
    f.q = 2;
    f.p = 3;
    f.tau_star = vec({2.0, 2.0});
    f.t_ranges = ranges({{0, 5}, {0, 4}});
    f.x_ranges = ranges({{-3, 3}, {-3, 3}, {0, 6}});
    f.noise_sd = 1.0;
    fs.push_back(f);
  }
  {
    TestFunction f;
    f.id = 2;
    f.q = 3;
    f.p = 4;
    f.tau_star = vec({2.0, 1.0, 3.0});
    f.t_ranges = ranges({{0, 5}, {0, 4}, {1, 5}});
    f.x_ranges = ranges({{-3, 4}, {-3, 3}, {0, 6}, {1, 5}});
    f.noise_sd = 1.0;
    fs.push_back(f);
  }
  {
    TestFunction f;
    f.id = 3;
    f.q = 2;
    f.p = 4;
    f.tau_star = vec({2.0, 3.0});
    f.t_ranges = ranges({{0, 4}, {1, 4}});
    f.x_ranges = ranges({{-0.5, 1.5}, {-0.5, 0.5}, {-0.5, 1.5}, {-0.5, 0.5}});
    f.noise_sd = std::sqrt(0.1);
    fs.push_back(f);
  }
  {
    TestFunction f;
    f.id = 4;
    f.q = 2;
    f.p = 8;
    f.tau_star = vec({2.0 * M_PI, 2.0});
    f.t_ranges = ranges({{5, 8}, {1, 3}});
    f.x_ranges = ranges({{6370, 115600},
                         {990, 1110},
                         {700, 820},
                         {100, 50000},
                         {0.05, 0.15},
                         {1120, 1680},
                         {9855, 12045},
                         {63.1, 116}});
    f.noise_sd = std::sqrt(2.0);
    fs.push_back(f);
  }
  {
    TestFunction f;
    f.id = 5;
    f.q = 4;
    f.p = 4;
    f.tau_star = vec({1.0, 2.0, 3.0, 2.0});
    f.t_ranges = ranges({{0, 5}, {0, 5}, {0, 7}, {0, 5}});
    f.x_ranges = ranges({{0, 3}, {0, 3}, {0, 2}, {0, 2}});
    f.noise_sd = 2.0;
    fs.push_back(f);
  }
  {
    TestFunction f;
    f.id = 6;
    f.q = 2;
    f.p = 2;
    f.tau_star = vec({4.0, 4.0});
    f.t_ranges = ranges({{1, 8}, {1, 8}});
    f.x_ranges = ranges({{0, 1}, {0, 1}});
    f.noise_sd = 0.02;
    f.has_bias = true;
    f.default_n_c = 20;
    f.default_n_e = 20;
    fs.push_back(f);
  }
  {
    TestFunction f;
    f.id = 7;
    f.q = 3;
    f.p = 2;
    f.tau_star = vec({2.0, 1.0, 3.0});
    f.t_ranges = ranges({{0.1, 5}, {0.1, 5}, {0.1, 5}});
    f.x_ranges = ranges({{0, 1}, {0, 1}});
    f.noise_sd = 0.5;
    f.has_bias = true;
    f.default_n_c = 20;
    f.default_n_e = 20;
    fs.push_back(f);
  }
  return fs;
}

const std::vector<TestFunction>& registry() {
  static const std::vector<TestFunction> fs = build_registry();
  return fs;
}

void check_dims(const TestFunction& f, const Eigen::VectorXd& tau, const Eigen::VectorXd& x) {
  if (tau.size() != f.q || x.size() != f.p)
    throw std::invalid_argument("eval_test_function: function " + std::to_string(f.id) +
                                " expects q=" + std::to_string(f.q) + ", p=" +
                                std::to_string(f.p));
}

}  // namespace

const TestFunction& test_function(int id) {
  for (const TestFunction& f : registry())
    if (f.id == id) return f;
  throw std::invalid_argument("test_function: unknown id " + std::to_string(id));
}

double eval_test_function(int id, const Eigen::VectorXd& tau, const Eigen::VectorXd& x) {
  const TestFunction& f = test_function(id);
  check_dims(f, tau, x);
  switch (id) {
    case 1:
      return tau[0] * std::exp(tau[1] + x[0]) + tau[0] * x[1] * x[1] - tau[1] * x[2] * x[2];
    case 2: {
      if (!(x[3] > 0.0))
        throw std::domain_error("eval_test_function: function 2 needs x_4 > 0 for the log term");
      return tau[0] * std::exp(tau[1] + x[0] + tau[2]) + tau[0] * tau[2] * x[1] * x[1] -
             tau[1] * x[2] * x[2] - tau[2] * std::log(x[3]);
    }
    case 3:
      return tau[0] * std::exp(std::fabs(x[0] + x[1])) +
             tau[1] * (x[2] + 1.2 * x[3] + 1.0) / 2.5 + tau[1] * 3.0 * std::cos(x[1] + x[2]);
    case 4: {
      if (!(x[3] > 0.0) || !(x[4] > 0.0))
        throw std::domain_error("eval_test_function: function 4 needs positive x_4, x_5");
      const double lg = std::log(x[3] / x[4]);
      if (lg == 0.0) throw std::domain_error("eval_test_function: function 4 log ratio is zero");
      const double denom = 1.0 + tau[1] * x[0] * x[5] / (lg * x[1] * x[1] * x[6]) + x[0] / x[7];
      return tau[0] * x[0] * (x[1] - x[2]) / (lg * denom);
    }
    case 5:
      return tau[0] * x[0] * x[0] + tau[1] * x[1] + tau[2] * std::cos(x[2] * M_PI) +
             tau[3] * std::sin(x[3] * M_PI);
    case 6:
      return tau[0] * x[0] * x[0] + tau[1] * x[1];
    case 7: {
      if (!(x[1] > 0.0))
        throw std::domain_error("eval_test_function: function 7 needs x_2 > 0");
      const double x1 = x[0];
      const double first = (1.0 - std::exp(-1.0 / (2.0 * x[1]))) *
                           (100.0 * tau[0] * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0) /
                           (100.0 * tau[1] * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0);
      const double e = tau[2] / 10.0;
      const double second =
          5.0 * std::exp(-tau[0]) * std::pow(x1, e) / (100.0 * (std::pow(x[1], 2.0 + e) + 1.0));
      return first + second;
    }
    default:
      throw std::invalid_argument("eval_test_function: unknown id");
  }
}

double test_function_bias(int id, const Eigen::VectorXd& x) {
  const TestFunction& f = test_function(id);
  if (x.size() != f.p) throw std::invalid_argument("test_function_bias: control dim mismatch");
  switch (id) {
    case 6:
      return x[1] * std::sin(5.0 * x[1]);
    case 7:
      return (10.0 * x[0] * x[0] + 4.0 * x[1] * x[1]) / (50.0 * x[0] * x[1] + 10.0);
    default:
      return 0.0;
  }
}

CalibrationDataset generate_toy_data(int id, int n_c, int n_e, std::uint64_t seed,
                                     const ToyDataOverrides& overrides) {
  const TestFunction& f = test_function(id);
  if (n_c < 1 || n_e < 1) throw std::invalid_argument("generate_toy_data: sizes must be >= 1");

  Eigen::MatrixXd comp_ranges(f.q + f.p, 2);
  comp_ranges.topRows(f.q) = f.t_ranges;
  comp_ranges.bottomRows(f.p) = f.x_ranges;
  RngStream comp_rng(seed, kComputerLhsStream);
  const Eigen::MatrixXd comp_inputs =
      lhs(DesignSpec{n_c, comp_ranges, LhsScheme::kRandom, 1}, comp_rng);

  RngStream exp_rng(seed, kExperimentalLhsStream);
  const Eigen::MatrixXd exp_x = lhs(DesignSpec{n_e, f.x_ranges, LhsScheme::kRandom, 1}, exp_rng);

  Eigen::VectorXd y_c(n_c);
  for (int i = 0; i < n_c; ++i)
    y_c[i] = eval_test_function(id, comp_inputs.row(i).head(f.q).transpose(),
                                comp_inputs.row(i).tail(f.p).transpose());

  const double noise_sd = overrides.noise_sd.value_or(f.noise_sd);
  RngStream noise(seed, kNoiseStream);
  Eigen::VectorXd y_e(n_e);
  for (int i = 0; i < n_e; ++i) {
    const Eigen::VectorXd x = exp_x.row(i).transpose();
    double v = eval_test_function(id, f.tau_star, x);
    if (overrides.include_bias) v += test_function_bias(id, x);
    y_e[i] = v + noise_sd * noise.normal();
  }

  return CalibrationDataset(
      ComputerData(comp_inputs.leftCols(f.q), comp_inputs.rightCols(f.p), y_c),
      ExperimentalData(exp_x, y_e));
}

double distance(const Eigen::VectorXd& tau_hat, const Eigen::VectorXd& tau_star) {
  if (tau_hat.size() != tau_star.size())
    throw std::invalid_argument("distance: length mismatch");
  return (tau_hat - tau_star).norm();
}

std::uint64_t dataset_hash(const CalibrationDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto fold = [&h](const double* ptr, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(ptr);
    for (Eigen::Index i = 0; i < n * static_cast<Eigen::Index>(sizeof(double)); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  fold(data.comp().t_inputs().data(), data.comp().t_inputs().size());
  fold(data.comp().x_inputs().data(), data.comp().x_inputs().size());
  fold(data.comp().responses().data(), data.comp().responses().size());
  fold(data.exp().x_inputs().data(), data.exp().x_inputs().size());
  fold(data.exp().responses().data(), data.exp().responses().size());
  return h;
}

namespace {

std::vector<BenchmarkCell> expand_cells(const BenchmarkMatrix& m) {
  std::vector<BenchmarkCell> cells;
  for (int fid : m.function_ids) {
    test_function(fid);  // validate before any run starts
    for (GPModel model : m.models) {
      for (bool bias : m.bias_flags) {
        for (Method method : m.methods) {
          if (bias && (method == Method::kSmle || method == Method::kFullMle)) continue;
          if (method == Method::kMaxMin) {
            for (Predictor variant : m.variants)
              cells.push_back({fid, method, model, variant, bias});
          } else {
            const Predictor canon =
                method == Method::kFullMle ? Predictor::kCombined : Predictor::kComputer;
            cells.push_back({fid, method, model, canon, bias});
          }
        }
      }
    }
  }
  if (cells.empty()) throw std::invalid_argument("run_benchmark: empty cell matrix");
  return cells;
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (v.size() - 1));
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkMatrix& matrix, int repetitions,
                              std::uint64_t base_seed, int jobs) {
  if (repetitions < 1) throw std::invalid_argument("run_benchmark: repetitions must be >= 1");
  BenchmarkReport report;
  report.base_seed = base_seed;
  report.repetitions = repetitions;
  report.cells = expand_cells(matrix);

  const std::size_t n_runs = report.cells.size() * static_cast<std::size_t>(repetitions);
  report.records.resize(n_runs);

  parallel_for(n_runs, jobs, [&](std::size_t run) {
    const std::size_t cell_idx = run / repetitions;
    const int rep = static_cast<int>(run % repetitions);
    const BenchmarkCell& cell = report.cells[cell_idx];
    const TestFunction& f = test_function(cell.function_id);

    BenchmarkRecord rec;
    rec.cell = cell;
    rec.repetition = rep;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const int n_c = matrix.n_c.value_or(f.default_n_c);
      const int n_e = matrix.n_e.value_or(f.default_n_e);
      // Dataset depends only on (base_seed, function, repetition): methods
      // within a repetition are paired.
      const std::uint64_t data_seed =
          mix_seed_path(base_seed, {kDatasetStream, static_cast<std::uint64_t>(cell.function_id),
                                    static_cast<std::uint64_t>(rep)});
      const CalibrationDataset data = generate_toy_data(cell.function_id, n_c, n_e, data_seed);
      rec.data_hash = dataset_hash(data);

      CalibrateOptions opts = matrix.calibrate;
      opts.bias_correction = cell.bias_correction;
      opts.seed = mix_seed_path(base_seed, {kRunStream, cell_idx, static_cast<std::uint64_t>(rep)});

      TuningEstimate est;
      switch (cell.method) {
        case Method::kAnls:
          est = anls(data, cell.model, opts);
          break;
        case Method::kSmle:
          est = smle(data, cell.model, opts);
          break;
        case Method::kFullMle:
          est = full_mle(data, cell.model, opts);
          break;
        case Method::kMaxMin: {
          MaxMinConfig cfg = matrix.maxmin;
          cfg.step4_variant = cell.variant;
          cfg.fluctuation_enabled = matrix.fluctuation_override.value_or(f.has_bias);
          est = maxmin(data, cell.model, cfg, opts);
          break;
        }
      }
      rec.tau_hat = est.tau_hat;
      rec.dist = distance(est.tau_hat, f.tau_star);
      rec.rss_p = est.rss_p;
      rec.bias = est.bias;
      rec.iterations = static_cast<int>(est.trace.size());
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.records[run] = std::move(rec);
  });

  // Per-cell aggregates over successful repetitions.
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    CellSummary s;
    s.cell = report.cells[c];
    const TestFunction& f = test_function(s.cell.function_id);
    std::vector<const BenchmarkRecord*> ok;
    for (int r = 0; r < repetitions; ++r) {
      const BenchmarkRecord& rec = report.records[c * repetitions + r];
      if (rec.failed)
        ++s.failures;
      else
        ok.push_back(&rec);
    }
    s.repetitions = static_cast<int>(ok.size());
    if (!ok.empty()) {
      const Eigen::Index q = f.q;
      Eigen::MatrixXd taus(ok.size(), q);
      Eigen::VectorXd dists(ok.size()), rsss(ok.size()), walls(ok.size());
      for (std::size_t i = 0; i < ok.size(); ++i) {
        taus.row(i) = ok[i]->tau_hat.transpose();
        dists[i] = ok[i]->dist;
        rsss[i] = ok[i]->rss_p;
        walls[i] = ok[i]->wall_seconds;
      }
      s.tau_mean = taus.colwise().mean();
      s.tau_sd.resize(q);
      for (Eigen::Index j = 0; j < q; ++j) s.tau_sd[j] = sample_sd(taus.col(j));
      s.dist_mean = dists.mean();
      s.dist_sd = sample_sd(dists);
      s.mse = s.dist_mean * s.dist_mean + s.tau_sd.squaredNorm();
      s.rss_mean = rsss.mean();
      s.rss_sd = sample_sd(rsss);
      s.wall_mean = walls.mean();
    }
    report.summaries.push_back(std::move(s));
  }

  // Relative improvement of each maxmin cell over the matching anls cell.
  for (const CellSummary& mm : report.summaries) {
    if (mm.cell.method != Method::kMaxMin || mm.repetitions == 0) continue;
    for (const CellSummary& an : report.summaries) {
      if (an.cell.method != Method::kAnls || an.repetitions == 0) continue;
      if (an.cell.function_id != mm.cell.function_id || an.cell.model != mm.cell.model ||
          an.cell.bias_correction != mm.cell.bias_correction)
        continue;
      if (!(an.rss_mean > 0.0)) continue;
      ImprovementEntry e;
      e.function_id = mm.cell.function_id;
      e.model = mm.cell.model;
      e.variant = mm.cell.variant;
      e.bias_correction = mm.cell.bias_correction;
      e.anls_mean = an.rss_mean;
      e.maxmin_mean = mm.rss_mean;
      e.ri_percent = relative_improvement(an.rss_mean, mm.rss_mean);
      report.improvements.push_back(e);
    }
  }
  return report;
}

}  // namespace codetune
