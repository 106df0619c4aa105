#ifndef CODETUNE_TOOLS_REPORT_HPP
#define CODETUNE_TOOLS_REPORT_HPP

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

namespace codetune::cli {

using Json = nlohmann::ordered_json;

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);

/// Report skeleton shared by every command: tool id, command name, the
/// effective configuration (flat key=value strings, reusable as a config
/// file), and the seed.
Json report_shell(const std::string& command, const std::vector<std::pair<std::string, std::string>>& config);

void write_report(const std::string& path, const Json& report);
Json load_report(const std::string& path);

/// Formats a double the way the CLI would accept it back.
std::string format_value(double v);

}  // namespace codetune::cli

#endif
