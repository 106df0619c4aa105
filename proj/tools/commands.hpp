#ifndef CODETUNE_TOOLS_COMMANDS_HPP
#define CODETUNE_TOOLS_COMMANDS_HPP

#include <CLI11.hpp>
#include <optional>
#include <string>

#include "codetune/bench.hpp"
#include "codetune/calibrate.hpp"
#include "error.hpp"

namespace codetune::cli {

void register_fit(CLI::App& app);
void register_calibrate(CLI::App& app);
void register_benchmark(CLI::App& app);
void register_design(CLI::App& app);
void register_report(CLI::App& app);

// ---- shared option-value parsing ----------------------------------------

GPModel parse_model(const std::string& s);
std::string model_name(GPModel m);

Method parse_method(const std::string& s);
std::string method_name(Method m);

Predictor parse_variant(const std::string& s);
std::string variant_name(Predictor v);

std::string stop_reason_name(StopReason r);

/// "lo:hi,lo:hi,..." -> d x 2 matrix.
Eigen::MatrixXd parse_ranges(const std::string& s);
std::string format_ranges(const Eigen::MatrixXd& b);

/// "v1,v2,..." -> vector.
Eigen::VectorXd parse_vector(const std::string& s);
std::string format_vector(const Eigen::VectorXd& v);

}  // namespace codetune::cli

#endif
