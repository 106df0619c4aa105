#include "report.hpp"

#include <cstdio>
#include <fstream>

#include "error.hpp"

namespace codetune::cli {

Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json report_shell(const std::string& command,
                  const std::vector<std::pair<std::string, std::string>>& config) {
  Json r;
  r["tool"] = "codetune";
  r["command"] = command;
  Json cfg = Json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  r["config"] = std::move(cfg);
  return r;
}

void write_report(const std::string& path, const Json& report) {
  std::ofstream out(path);
  if (!out) throw CliError("io", "cannot write '" + path + "'");
  out << report.dump(2) << '\n';
  if (!out) throw CliError("io", "failed writing '" + path + "'");
}

Json load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CliError("parse", path + ": " + e.what());
  }
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace codetune::cli
