#include "csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace codetune::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_cell(const std::string& raw, const std::string& path, std::size_t row,
                  std::size_t col) {
  const std::string s = trimmed(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw CliError("parse", path + ": malformed numeric cell at row " + std::to_string(row) +
                                ", column " + std::to_string(col) + ": '" + raw + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw CliError("parse", path + ": empty file, header mandatory");
  Table t;
  for (const std::string& h : split(line)) t.header.push_back(trimmed(h));
  std::vector<std::vector<double>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trimmed(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != t.header.size())
      throw CliError("parse", path + ": row " + std::to_string(row_no) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(t.header.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      vals[c] = parse_cell(cells[c], path, row_no, c + 1);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw CliError("parse", path + ": no data rows");
  t.values.resize(rows.size(), t.header.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c) t.values(r, c) = rows[r][c];
  return t;
}

// Counts a `prefix1..prefixK,rest` run at offset `at`; returns K.
std::size_t count_prefixed(const std::vector<std::string>& header, std::size_t at,
                           const std::string& prefix, const std::string& path) {
  std::size_t k = 0;
  while (at + k < header.size()) {
    const std::string expect = prefix + std::to_string(k + 1);
    if (header[at + k] != expect) break;
    ++k;
  }
  if (k == 0 && prefix == "x")
    throw CliError("parse", path + ": header must contain x1..xp columns");
  return k;
}

}  // namespace

ComputerData read_computer_csv(const std::string& path) {
  const Table t = read_table(path);
  const std::size_t q = count_prefixed(t.header, 0, "t", path);
  if (q == 0)
    throw CliError("parse", path + ": computer header must start with t1..tq, got '" +
                                t.header.front() + "'");
  const std::size_t p = count_prefixed(t.header, q, "x", path);
  if (t.header.size() != q + p + 1 || t.header.back() != "y")
    throw CliError("parse", path + ": computer header must be t1..tq,x1..xp,y");
  try {
    return ComputerData(t.values.leftCols(q), t.values.middleCols(q, p),
                        t.values.rightCols(1));
  } catch (const std::invalid_argument& e) {
    throw CliError("parse", path + ": " + e.what());
  }
}

ExperimentalData read_experimental_csv(const std::string& path) {
  const Table t = read_table(path);
  const std::size_t p = count_prefixed(t.header, 0, "x", path);
  if (t.header.size() != p + 1 || t.header.back() != "y")
    throw CliError("parse", path + ": experimental header must be x1..xp,y");
  try {
    return ExperimentalData(t.values.leftCols(p), t.values.rightCols(1));
  } catch (const std::invalid_argument& e) {
    throw CliError("parse", path + ": " + e.what());
  }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw CliError("io", "cannot write '" + path + "'");
  for (std::size_t j = 0; j < header.size(); ++j)
    out << header[j] << (j + 1 < header.size() ? ',' : '\n');
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << m(i, j) << (j + 1 < m.cols() ? ',' : '\n');
  if (!out) throw CliError("io", "failed writing '" + path + "'");
}

}  // namespace codetune::cli
