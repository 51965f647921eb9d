#pragma once

#include "calib/types.hpp"

#include <string>
#include <vector>

namespace calib {

// Experimental CSV layout: header row, p input columns then one output
// column, '.' decimal separator, UTF-8.
ExperimentalDataset read_experimental_csv(const std::string& path);

// Simulator CSV layout: header row, p input columns, d parameter columns,
// one output column. d must be supplied (from the parameter space) so the
// input/parameter split is unambiguous.
SimulatorDataset read_simulator_csv(const std::string& path, Eigen::Index param_dim);

// %.17g: re-reading reproduces the double exactly.
std::string format_double(double v);

// Writes via a temp file in the same directory followed by rename.
void write_text_atomic(const std::string& path, const std::string& content);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows);

}  // namespace calib
