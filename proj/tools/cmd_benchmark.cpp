#include <cstdio>
#include <memory>
#include <sstream>

#include "codetune/parallel.hpp"
#include "commands.hpp"
#include "report.hpp"

namespace codetune::cli {

namespace {

struct BenchConfig {
  std::string functions = "1";
  std::string methods = "anls,maxmin";
  std::string models = "common";
  std::string variants = "combined";
  std::string bias_flags = "off";
  int repetitions = 30;
  int n_c = 0;  // 0 = per-function default
  int n_e = 0;
  int max_iterations = 20;
  double ftol = 1e-4;
  int maxagain = 7;
  std::string fluctuation = "auto";  // auto|on|off
  int multistart = 8;
  int tau_multistart = 8;
  int jobs = 0;  // 0 = machine parallelism / CODETUNE_JOBS
  std::uint64_t seed = kDefaultSeed;
  std::string out = "benchmark_report.json";
};

template <typename T>
std::vector<T> parse_list(const std::string& csv, T (*one)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(one(item));
  if (out.empty()) throw CliError("config", "empty list '" + csv + "'");
  return out;
}

int parse_fid(const std::string& s) {
  try {
    test_function(std::stoi(s));
  } catch (const std::exception&) {
    throw CliError("config", "unknown test function '" + s + "'");
  }
  return std::stoi(s);
}

bool parse_bias_flag(const std::string& s) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw CliError("config", "bias flag must be on|off, got '" + s + "'");
}

Json cell_json(const BenchmarkCell& c) {
  return Json{{"function", c.function_id},
              {"method", method_name(c.method)},
              {"model", model_name(c.model)},
              {"variant", variant_name(c.variant)},
              {"bias", c.bias_correction}};
}

void print_summary_table(const BenchmarkReport& rep) {
  std::printf("%-4s %-10s %-8s %-23s %-5s | %-34s %-44s %-8s %-14s\n", "fn", "model", "method",
              "variant", "bias", "Average of tau_i (SD)",
              "Average distance to the true value (SD)", "MSE", "mean RSS_p");
  for (const CellSummary& s : rep.summaries) {
    std::string taus;
    for (Eigen::Index j = 0; j < s.tau_mean.size(); ++j) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%s%.3f (%.3f)", j ? "  " : "", s.tau_mean[j], s.tau_sd[j]);
      taus += buf;
    }
    std::printf("%-4d %-10s %-8s %-23s %-5s | %-34s %.3f (%.3f)%*s %-8.3f %-14.4g", s.cell.function_id,
                model_name(s.cell.model).c_str(), method_name(s.cell.method).c_str(),
                variant_name(s.cell.variant).c_str(), s.cell.bias_correction ? "on" : "off",
                taus.c_str(), s.dist_mean, s.dist_sd, 29, "", s.mse, s.rss_mean);
    if (s.failures > 0) std::printf("  [%d failed]", s.failures);
    std::printf("\n");
  }
  for (const ImprovementEntry& e : rep.improvements)
    std::printf("RI fn=%d model=%s variant=%s bias=%s: %.1f%% (anls %.4g -> maxmin %.4g)\n",
                e.function_id, model_name(e.model).c_str(), variant_name(e.variant).c_str(),
                e.bias_correction ? "on" : "off", e.ri_percent, e.anls_mean, e.maxmin_mean);
}

void run_bench(const BenchConfig& cfg) {
  BenchmarkMatrix m;
  m.function_ids = parse_list<int>(cfg.functions, parse_fid);
  m.methods = parse_list<Method>(cfg.methods, parse_method);
  m.models = parse_list<GPModel>(cfg.models, parse_model);
  m.variants = parse_list<Predictor>(cfg.variants, parse_variant);
  m.bias_flags = parse_list<bool>(cfg.bias_flags, parse_bias_flag);
  if (cfg.n_c > 0) m.n_c = cfg.n_c;
  if (cfg.n_e > 0) m.n_e = cfg.n_e;
  m.maxmin.max_iterations = cfg.max_iterations;
  m.maxmin.ftol = cfg.ftol;
  m.maxmin.maxagain = cfg.maxagain;
  if (cfg.fluctuation != "auto") m.fluctuation_override = parse_bias_flag(cfg.fluctuation);
  m.calibrate.fit.multistart = cfg.multistart;
  m.calibrate.tau_multistart = cfg.tau_multistart;

  const int jobs = resolve_jobs(cfg.jobs);
  BenchmarkReport rep;
  try {
    rep = run_benchmark(m, cfg.repetitions, cfg.seed, jobs);
  } catch (const std::invalid_argument& e) {
    throw CliError("domain", e.what());
  }

  std::vector<std::pair<std::string, std::string>> echo = {
      {"functions", cfg.functions},
      {"methods", cfg.methods},
      {"models", cfg.models},
      {"variants", cfg.variants},
      {"bias-flags", cfg.bias_flags},
      {"repetitions", std::to_string(cfg.repetitions)},
      {"nc", std::to_string(cfg.n_c)},
      {"ne", std::to_string(cfg.n_e)},
      {"max-iterations", std::to_string(cfg.max_iterations)},
      {"ftol", format_value(cfg.ftol)},
      {"maxagain", std::to_string(cfg.maxagain)},
      {"fluctuation", cfg.fluctuation},
      {"multistart", std::to_string(cfg.multistart)},
      {"tau-multistart", std::to_string(cfg.tau_multistart)},
      {"seed", std::to_string(cfg.seed)},
      {"out", cfg.out},
  };
  Json r = report_shell("benchmark", echo);
  r["seed"] = cfg.seed;
  r["repetitions"] = cfg.repetitions;

  Json records = Json::array();
  for (const BenchmarkRecord& rec : rep.records) {
    Json j;
    j["cell"] = cell_json(rec.cell);
    j["repetition"] = rec.repetition;
    j["failed"] = rec.failed;
    if (rec.failed) {
      j["error"] = rec.error;
    } else {
      j["tau_hat"] = to_json(rec.tau_hat);
      j["distance"] = rec.dist;
      j["rss_p"] = rec.rss_p;
      if (rec.bias) j["bias"] = Json{{"rho", rec.bias->rho}, {"delta", rec.bias->delta}};
      j["iterations"] = rec.iterations;
      j["dataset_hash"] = rec.data_hash;
      j["wall_seconds"] = rec.wall_seconds;
    }
    records.push_back(std::move(j));
  }
  r["results"]["records"] = std::move(records);

  Json cells = Json::array();
  for (const CellSummary& s : rep.summaries) {
    Json j;
    j["cell"] = cell_json(s.cell);
    j["repetitions"] = s.repetitions;
    j["failures"] = s.failures;
    j["tau_mean"] = to_json(s.tau_mean);
    j["tau_sd"] = to_json(s.tau_sd);
    j["dist_mean"] = s.dist_mean;
    j["dist_sd"] = s.dist_sd;
    j["mse"] = s.mse;
    j["rss_mean"] = s.rss_mean;
    j["rss_sd"] = s.rss_sd;
    j["wall_mean_seconds"] = s.wall_mean;
    cells.push_back(std::move(j));
  }
  r["results"]["summaries"] = std::move(cells);

  Json ris = Json::array();
  for (const ImprovementEntry& e : rep.improvements)
    ris.push_back(Json{{"function", e.function_id},
                       {"model", model_name(e.model)},
                       {"variant", variant_name(e.variant)},
                       {"bias", e.bias_correction},
                       {"anls_mean_rss", e.anls_mean},
                       {"maxmin_mean_rss", e.maxmin_mean},
                       {"relative_improvement_percent", e.ri_percent}});
  r["results"]["relative_improvement"] = std::move(ris);

  write_report(cfg.out, r);
  print_summary_table(rep);
}

}  // namespace

void register_benchmark(CLI::App& app) {
  auto cfg = std::make_shared<BenchConfig>();
  CLI::App* sub = app.add_subcommand("benchmark", "Run the toy-function comparison harness");
  sub->add_option("--functions", cfg->functions, "Test function ids, e.g. 1,3,6")
      ->capture_default_str();
  sub->add_option("--methods", cfg->methods, "anls,smle,full-mle,maxmin")->capture_default_str();
  sub->add_option("--models", cfg->models, "common,separable")->capture_default_str();
  sub->add_option("--variants", cfg->variants, "Maxmin refit-round predictors")
      ->capture_default_str();
  sub->add_option("--bias-flags", cfg->bias_flags, "off,on")->capture_default_str();
  sub->add_option("--repetitions", cfg->repetitions, "Seeded repetitions per cell")
      ->capture_default_str();
  sub->add_option("--nc", cfg->n_c, "Computer sample size (0 = per-function default)")
      ->capture_default_str();
  sub->add_option("--ne", cfg->n_e, "Experimental sample size (0 = per-function default)")
      ->capture_default_str();
  sub->add_option("--max-iterations", cfg->max_iterations, "Maxmin iteration cap")
      ->capture_default_str();
  sub->add_option("--ftol", cfg->ftol, "Maxmin improvement tolerance")->capture_default_str();
  sub->add_option("--maxagain", cfg->maxagain, "Maxmin stall budget with fluctuation")
      ->capture_default_str();
  sub->add_option("--fluctuation", cfg->fluctuation,
                  "auto|on|off (auto: off for exact functions, on for biased ones)")
      ->capture_default_str();
  sub->add_option("--multistart", cfg->multistart, "Likelihood multistart count")
      ->capture_default_str();
  sub->add_option("--tau-multistart", cfg->tau_multistart, "Tau-search multistart count")
      ->capture_default_str();
  sub->add_option("--jobs", cfg->jobs, "Worker threads (0 = CODETUNE_JOBS or machine)")
      ->capture_default_str();
  sub->add_option("--seed", cfg->seed, "Base seed")->capture_default_str();
  sub->add_option("--out", cfg->out, "Report path")->capture_default_str();
  sub->set_config("--config", "", "Flat key=value config file");
  sub->callback([cfg] { run_bench(*cfg); });
}

}  // namespace codetune::cli
