#include <memory>

#include "commands.hpp"
#include "csv.hpp"
#include "report.hpp"

namespace codetune::cli {

namespace {

struct CalifConfig {
  std::string computer_csv;
  std::string experimental_csv;
  std::string method = "anls";
  std::string model = "common";
  std::string variant = "combined";  // maxmin refit-round predictor
  bool bias = false;
  std::string tau_bounds;
  int multistart = 8;
  int tau_multistart = 8;
  // Iterative-method settings.
  int max_iterations = 20;
  double ftol = 1e-4;
  int maxagain = 7;
  bool fluctuation = false;
  bool warm_only = false;
  std::string stop_rule = "all";
  // Confidence region.
  double alpha = 0.05;
  std::string cr_pair;  // "i,j" (1-based); empty disables the region grid
  int cr_grid = 61;
  bool cr_profile = false;
  std::uint64_t seed = kDefaultSeed;
  std::string out = "calibrate_report.json";
};

StopRule parse_stop_rule(const std::string& s) {
  if (s == "all") return StopRule::kAll;
  if (s == "max-iter") return StopRule::kMaxIter;
  if (s == "min-improvement") return StopRule::kMinImprovement;
  if (s == "min-rel-improvement") return StopRule::kMinRelImprovement;
  throw CliError("config", "unknown stop rule '" + s + "'");
}

void run_calibrate(const CalifConfig& cfg) {
  const ComputerData comp = read_computer_csv(cfg.computer_csv);
  if (cfg.experimental_csv.empty()) throw CliError("config", "--experimental is required");
  const GPModel model = parse_model(cfg.model);
  const Method method = parse_method(cfg.method);

  CalibrateOptions opts;
  opts.fit.multistart = cfg.multistart;
  opts.tau_multistart = cfg.tau_multistart;
  opts.bias_correction = cfg.bias;
  opts.seed = cfg.seed;
  if (!cfg.tau_bounds.empty()) opts.tau_bounds = parse_ranges(cfg.tau_bounds);

  MaxMinConfig mm;
  mm.max_iterations = cfg.max_iterations;
  mm.ftol = cfg.ftol;
  mm.maxagain = cfg.maxagain;
  mm.fluctuation_enabled = cfg.fluctuation;
  mm.step4_variant = parse_variant(cfg.variant);
  mm.step4_warm_only = cfg.warm_only;
  mm.stop_rule = parse_stop_rule(cfg.stop_rule);

  TuningEstimate est;
  std::optional<CalibrationDataset> data;
  try {
    data.emplace(comp, read_experimental_csv(cfg.experimental_csv));
    switch (method) {
      case Method::kAnls: est = anls(*data, model, opts); break;
      case Method::kSmle: est = smle(*data, model, opts); break;
      case Method::kFullMle: est = full_mle(*data, model, opts); break;
      case Method::kMaxMin: est = maxmin(*data, model, mm, opts); break;
    }
  } catch (const std::invalid_argument& e) {
    throw CliError("domain", e.what());
  }

  std::vector<std::pair<std::string, std::string>> echo = {
      {"computer", cfg.computer_csv},
      {"experimental", cfg.experimental_csv},
      {"method", cfg.method},
      {"model", cfg.model},
      {"variant", cfg.variant},
      {"bias", cfg.bias ? "true" : "false"},
      {"tau-bounds", cfg.tau_bounds},
      {"multistart", std::to_string(cfg.multistart)},
      {"tau-multistart", std::to_string(cfg.tau_multistart)},
      {"max-iterations", std::to_string(cfg.max_iterations)},
      {"ftol", format_value(cfg.ftol)},
      {"maxagain", std::to_string(cfg.maxagain)},
      {"fluctuation", cfg.fluctuation ? "true" : "false"},
      {"warm-only", cfg.warm_only ? "true" : "false"},
      {"stop-rule", cfg.stop_rule},
      {"alpha", format_value(cfg.alpha)},
      {"cr-pair", cfg.cr_pair},
      {"cr-grid", std::to_string(cfg.cr_grid)},
      {"cr-profile", cfg.cr_profile ? "true" : "false"},
      {"seed", std::to_string(cfg.seed)},
      {"out", cfg.out},
  };
  Json r = report_shell("calibrate", echo);
  r["seed"] = cfg.seed;

  Json res;
  res["method"] = method_name(est.method);
  res["model"] = model_name(model);
  res["variant"] = variant_name(est.variant);
  res["tau_hat"] = to_json(est.tau_hat);
  res["rss_p"] = est.rss_p;
  if (est.bias) res["bias"] = Json{{"rho", est.bias->rho}, {"delta", est.bias->delta}};
  if (est.aux_gamma_e) res["conditional_gamma_E"] = *est.aux_gamma_e;
  res["stop_reason"] = stop_reason_name(est.stop_reason);
  Json trace = Json::array();
  for (const TraceEntry& t : est.trace)
    trace.push_back(Json{{"iteration", t.iteration}, {"tau", to_json(t.tau)}, {"rss_p", t.rss_p}});
  res["trace"] = std::move(trace);

  const FittedGP& gp = *est.fitted;
  res["gp"] = Json{{"theta", to_json(gp.kernel().theta)},
                   {"beta", to_json(gp.beta())},
                   {"sigma2", gp.sigma2()},
                   {"gamma_E", gp.gamma_e()},
                   {"training", gp.training() == TrainingSet::kCombined ? "combined" : "computer"}};

  // Residuals at the data points, plot-ready, computer and experimental rows
  // tagged by source.
  {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < comp.n(); ++i) {
      Eigen::VectorXd x0(comp.q() + comp.p());
      x0 << comp.t_inputs().row(i).transpose(), comp.x_inputs().row(i).transpose();
      const double pred = gp.training() == TrainingSet::kCombined
                              ? gp.predict_trained(x0)
                              : gp.predict(x0, Predictor::kComputer);
      rows.push_back(Json{{"source", "C"},
                          {"predicted", pred},
                          {"residual", comp.responses()[i] - pred}});
    }
    const Eigen::MatrixXd xe = assemble_experimental_inputs(data->exp(), est.tau_hat);
    Eigen::VectorXd pe = gp.predict(xe, est.variant);
    if (est.bias) pe = est.bias->rho * pe.array() + est.bias->delta;
    for (Eigen::Index i = 0; i < pe.size(); ++i)
      rows.push_back(Json{{"source", "E"},
                          {"predicted", pe[i]},
                          {"residual", data->exp().responses()[i] - pe[i]}});
    res["residuals"] = std::move(rows);
  }

  if (!cfg.cr_pair.empty()) {
    const Eigen::VectorXd pair_v = parse_vector(cfg.cr_pair);
    if (pair_v.size() != 2) throw CliError("config", "cr-pair must be i,j (1-based)");
    const std::pair<int, int> pair{static_cast<int>(pair_v[0]) - 1,
                                   static_cast<int>(pair_v[1]) - 1};
    ConfidenceGridSpec grid;
    grid.n_i = cfg.cr_grid;
    grid.n_j = cfg.cr_grid;
    grid.profile_off_pair = cfg.cr_profile;
    const Eigen::MatrixXd bounds = resolve_tau_bounds(*data, opts);
    ConfidenceRegion cr;
    try {
      cr = confidence_region(est, data->exp(), cfg.alpha, pair, grid, bounds);
    } catch (const std::invalid_argument& e) {
      throw CliError("domain", e.what());
    }
    Json cj;
    cj["alpha"] = cr.alpha;
    cj["threshold"] = cr.threshold;
    cj["f_value"] = cr.f_value;
    cj["coord_i"] = cr.coord_i + 1;
    cj["coord_j"] = cr.coord_j + 1;
    const Eigen::Index cells = cr.rss.size();
    // Plot-ready flat columns; large grids go to a CSV side-file.
    Eigen::MatrixXd flat(cells, 5);
    Eigen::Index k = 0;
    for (int a = 0; a < cr.rss.rows(); ++a)
      for (int b = 0; b < cr.rss.cols(); ++b, ++k)
        flat.row(k) << cr.grid_i[a], cr.grid_j[b], cr.rss(a, b), cr.threshold,
            static_cast<double>(cr.inside(a, b));
    const std::vector<std::string> header = {"tau_i", "tau_j", "rss_p", "threshold", "inside"};
    if (cells > 2500) {
      const std::string side = cfg.out + ".cr.csv";
      write_matrix_csv(side, flat, header);
      cj["grid_csv"] = side;
    } else {
      Json cols = Json::object();
      for (int c = 0; c < 5; ++c) cols[header[c]] = to_json(Eigen::VectorXd(flat.col(c)));
      cj["grid"] = std::move(cols);
    }
    res["confidence_region"] = std::move(cj);
  }

  r["results"] = std::move(res);
  write_report(cfg.out, r);
}

}  // namespace

void register_calibrate(CLI::App& app) {
  auto cfg = std::make_shared<CalifConfig>();
  CLI::App* sub = app.add_subcommand("calibrate", "Estimate tuning parameters from CSV data");
  sub->add_option("--computer", cfg->computer_csv, "Computer-data CSV")->required();
  sub->add_option("--experimental", cfg->experimental_csv, "Experimental CSV")->required();
  sub->add_option("--method", cfg->method, "anls|smle|full-mle|maxmin")->capture_default_str();
  sub->add_option("--model", cfg->model, "common|separable")->capture_default_str();
  sub->add_option("--variant", cfg->variant,
                  "Refit-round predictor: combined|computer-from-combined")
      ->capture_default_str();
  sub->add_flag("--bias", cfg->bias, "Estimate multiplicative/additive bias constants");
  sub->add_option("--tau-bounds", cfg->tau_bounds,
                  "Search box lo:hi,lo:hi,.. (default: computer T ranges)");
  sub->add_option("--multistart", cfg->multistart, "Likelihood multistart count")
      ->capture_default_str();
  sub->add_option("--tau-multistart", cfg->tau_multistart, "Tau-search multistart count")
      ->capture_default_str();
  sub->add_option("--max-iterations", cfg->max_iterations, "Iteration cap (maxmin)")
      ->capture_default_str();
  sub->add_option("--ftol", cfg->ftol, "Improvement tolerance (maxmin)")->capture_default_str();
  sub->add_option("--maxagain", cfg->maxagain, "Stall budget with fluctuation (maxmin)")
      ->capture_default_str();
  sub->add_flag("--fluctuation", cfg->fluctuation, "Perturb tau after a worsening round");
  sub->add_flag("--warm-only", cfg->warm_only, "Refit rounds search from the previous tau only");
  sub->add_option("--stop-rule", cfg->stop_rule,
                  "all|max-iter|min-improvement|min-rel-improvement")
      ->capture_default_str();
  sub->add_option("--alpha", cfg->alpha, "Confidence-region level")->capture_default_str();
  sub->add_option("--cr-pair", cfg->cr_pair, "Coordinate pair i,j (1-based) for the region grid");
  sub->add_option("--cr-grid", cfg->cr_grid, "Grid points per axis")->capture_default_str();
  sub->add_flag("--cr-profile", cfg->cr_profile, "Profile the off-pair coordinates");
  sub->add_option("--seed", cfg->seed, "Seed for the fluctuation stream")->capture_default_str();
  sub->add_option("--out", cfg->out, "Report path")->capture_default_str();
  sub->set_config("--config", "", "Flat key=value config file");
  sub->callback([cfg] { run_calibrate(*cfg); });
}

}  // namespace codetune::cli
