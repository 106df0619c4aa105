#include <charconv>
#include <sstream>

#include "commands.hpp"
#include "report.hpp"

namespace codetune::cli {

namespace {

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw CliError("config", "bad number in " + what + ": '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

GPModel parse_model(const std::string& s) {
  if (s == "common" || s == "1") return GPModel::kCommonTheta;
  if (s == "separable" || s == "2") return GPModel::kSeparableTheta;
  throw CliError("config", "unknown model '" + s + "' (use common|separable)");
}

std::string model_name(GPModel m) {
  return m == GPModel::kCommonTheta ? "common" : "separable";
}

Method parse_method(const std::string& s) {
  if (s == "anls") return Method::kAnls;
  if (s == "smle") return Method::kSmle;
  if (s == "full-mle") return Method::kFullMle;
  if (s == "maxmin") return Method::kMaxMin;
  throw CliError("config", "unknown method '" + s + "' (use anls|smle|full-mle|maxmin)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kAnls: return "anls";
    case Method::kSmle: return "smle";
    case Method::kFullMle: return "full-mle";
    case Method::kMaxMin: return "maxmin";
  }
  return "?";
}

Predictor parse_variant(const std::string& s) {
  if (s == "computer") return Predictor::kComputer;
  if (s == "combined") return Predictor::kCombined;
  if (s == "computer-from-combined" || s == "hybrid") return Predictor::kComputerFromCombined;
  throw CliError("config",
                 "unknown variant '" + s + "' (use computer|combined|computer-from-combined)");
}

std::string variant_name(Predictor v) {
  switch (v) {
    case Predictor::kComputer: return "computer";
    case Predictor::kCombined: return "combined";
    case Predictor::kComputerFromCombined: return "computer-from-combined";
  }
  return "?";
}

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kNone: return "none";
    case StopReason::kMaxIterations: return "max-iterations";
    case StopReason::kMinImprovement: return "min-improvement";
    case StopReason::kMinRelImprovement: return "min-rel-improvement";
  }
  return "?";
}

Eigen::MatrixXd parse_ranges(const std::string& s) {
  const std::vector<std::string> parts = split(s, ',');
  if (parts.empty()) throw CliError("config", "empty range list");
  Eigen::MatrixXd b(parts.size(), 2);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::vector<std::string> lohi = split(parts[i], ':');
    if (lohi.size() != 2)
      throw CliError("config", "range entry '" + parts[i] + "' is not lo:hi");
    b(i, 0) = parse_double(lohi[0], "ranges");
    b(i, 1) = parse_double(lohi[1], "ranges");
    if (!(b(i, 0) < b(i, 1)))
      throw CliError("config", "range entry '" + parts[i] + "' needs lo < hi");
  }
  return b;
}

std::string format_ranges(const Eigen::MatrixXd& b) {
  std::string out;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    if (i) out += ',';
    out += format_value(b(i, 0)) + ":" + format_value(b(i, 1));
  }
  return out;
}

Eigen::VectorXd parse_vector(const std::string& s) {
  const std::vector<std::string> parts = split(s, ',');
  Eigen::VectorXd v(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) v[i] = parse_double(parts[i], "vector");
  return v;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_value(v[i]);
  }
  return out;
}

}  // namespace codetune::cli
