#include <memory>

#include "codetune/gp.hpp"
#include "commands.hpp"
#include "csv.hpp"
#include "report.hpp"

namespace codetune::cli {

namespace {

struct FitConfig {
  std::string computer_csv;
  std::string experimental_csv;
  std::string model = "common";
  std::string training = "computer";
  std::string tau;
  std::string tau_bounds;
  int multistart = 8;
  std::uint64_t seed = kDefaultSeed;
  std::string out = "fit_report.json";
};

void run_fit(const FitConfig& cfg) {
  const ComputerData comp = read_computer_csv(cfg.computer_csv);
  const GPModel model = parse_model(cfg.model);
  FitOptions fopts;
  fopts.multistart = cfg.multistart;
  if (!cfg.tau_bounds.empty()) fopts.tau_bounds = parse_ranges(cfg.tau_bounds);

  FittedGP gp = [&] {
    if (cfg.training == "computer") {
      Standardizer std = Standardizer::from_dataset(comp, nullptr, fopts.tau_bounds,
                                                    ResponseScope::kComputerOnly);
      return fit_gp(std, TrainingSet::kComputerOnly, model, comp.inputs(), comp.responses(),
                    comp.n(), Eigen::VectorXd(), fopts);
    }
    if (cfg.training != "combined")
      throw CliError("config", "unknown training '" + cfg.training + "' (use computer|combined)");
    if (cfg.experimental_csv.empty())
      throw CliError("config", "combined training needs --experimental");
    if (cfg.tau.empty()) throw CliError("config", "combined training needs --tau");
    try {
      const CalibrationDataset data(comp, read_experimental_csv(cfg.experimental_csv));
      return fit_mle(data, model, TrainingSet::kCombined, parse_vector(cfg.tau), fopts);
    } catch (const std::invalid_argument& e) {
      throw CliError("domain", e.what());
    }
  }();

  std::vector<std::pair<std::string, std::string>> echo = {
      {"computer", cfg.computer_csv},
      {"experimental", cfg.experimental_csv},
      {"model", cfg.model},
      {"training", cfg.training},
      {"tau", cfg.tau},
      {"tau-bounds", cfg.tau_bounds},
      {"multistart", std::to_string(cfg.multistart)},
      {"seed", std::to_string(cfg.seed)},
      {"out", cfg.out},
  };
  Json r = report_shell("fit", echo);
  r["seed"] = cfg.seed;

  Json res;
  res["model"] = model_name(model);
  res["training"] = cfg.training;
  res["n_C"] = comp.n();
  res["n_E"] = gp.n_train() - gp.n_comp();
  res["theta"] = to_json(gp.kernel().theta);
  res["beta"] = to_json(gp.beta());
  res["sigma2"] = gp.sigma2();
  res["gamma_E"] = gp.gamma_e();
  res["neg2loglik"] = gp.neg2loglik();

  // Symbol/description/estimate rows, one per parameter.
  Json table = Json::array();
  auto row = [&table](const std::string& sym, const std::string& desc, double val) {
    table.push_back(Json{{"symbol", sym}, {"description", desc}, {"estimate", val}});
  };
  row("n_E", "Sample size of experimental data", static_cast<double>(gp.n_train() - gp.n_comp()));
  row("n_C", "Sample size of computer data", static_cast<double>(comp.n()));
  for (Eigen::Index i = 0; i < gp.kernel().theta.size(); ++i)
    row(gp.kernel().theta.size() == 1 ? "theta" : "theta_" + std::to_string(i + 1),
        "Correlation rate", gp.kernel().theta[i]);
  for (Eigen::Index i = 0; i < gp.beta().size(); ++i)
    row("beta_" + std::to_string(i),
        i == 0 ? "Regression coefficient (intercept)"
               : "Regression coefficient for input " + std::to_string(i),
        gp.beta()[i]);
  row("sigma2", "Process variance (standardized response units)", gp.sigma2());
  row("gamma_E", "Experimental noise-to-process variance ratio", gp.gamma_e());
  res["parameter_table"] = std::move(table);
  r["results"] = std::move(res);
  write_report(cfg.out, r);
}

}  // namespace

void register_fit(CLI::App& app) {
  auto cfg = std::make_shared<FitConfig>();
  CLI::App* sub = app.add_subcommand("fit", "Estimate GP hyperparameters from CSV data");
  sub->add_option("--computer", cfg->computer_csv, "Computer-data CSV (t1..tq,x1..xp,y)")
      ->required();
  sub->add_option("--experimental", cfg->experimental_csv, "Experimental CSV (x1..xp,y)");
  sub->add_option("--model", cfg->model, "GP correlation: common|separable")
      ->capture_default_str();
  sub->add_option("--training", cfg->training, "Rows to fit: computer|combined")
      ->capture_default_str();
  sub->add_option("--tau", cfg->tau, "Tuning values for combined training, v1,v2,..");
  sub->add_option("--tau-bounds", cfg->tau_bounds, "Tuning input map ranges, lo:hi,lo:hi,..");
  sub->add_option("--multistart", cfg->multistart, "Likelihood multistart count")
      ->capture_default_str();
  sub->add_option("--seed", cfg->seed, "Seed (kept in the report)")->capture_default_str();
  sub->add_option("--out", cfg->out, "Report path")->capture_default_str();
  sub->set_config("--config", "", "Flat key=value config file");
  sub->callback([cfg] { run_fit(*cfg); });
}

}  // namespace codetune::cli
