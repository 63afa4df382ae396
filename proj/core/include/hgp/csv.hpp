#pragma once

#include <string>

#include <Eigen/Dense>

namespace hgp {

// Rectangular numeric CSV, one frame per row, no header, comma delimiter.
// Throws ConfigError naming the offending 1-based row (and column) on ragged
// rows, non-numeric cells, or an empty file.
Eigen::MatrixXd ingest_csv_frames(const std::string& path);

/// Writes with 17 significant digits so a round trip is exact.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace hgp
