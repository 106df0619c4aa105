#ifndef CODETUNE_TOOLS_CSV_HPP
#define CODETUNE_TOOLS_CSV_HPP

#include <Eigen/Dense>
#include <string>

#include "codetune/data.hpp"
#include "error.hpp"

namespace codetune::cli {

/// Computer-data schema: header `t1,..,tq,x1,..,xp,y`, comma separated,
/// `.` decimal, one run per row. q and p are inferred from the header.
ComputerData read_computer_csv(const std::string& path);

/// Experimental-data schema: header `x1,..,xp,y`.
ExperimentalData read_experimental_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header);

}  // namespace codetune::cli

#endif
