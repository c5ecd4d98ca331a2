#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

namespace cem {

/// Plain-text grid dump: one comma-separated line per row, values printed
/// with max_digits10 so re-reading is lossless and re-running is byte-stable.
void write_grid_csv(const std::filesystem::path& path, const Eigen::MatrixXd& grid);
Eigen::MatrixXd read_grid_csv(const std::filesystem::path& path);

/// Binary grid dump: 16-byte header of two little-endian uint64 counts
/// (rows, cols), then float64 values row-major.
void write_grid_bin(const std::filesystem::path& path, const Eigen::MatrixXd& grid);
Eigen::MatrixXd read_grid_bin(const std::filesystem::path& path);

/// Reads .csv or .bin by extension.
Eigen::MatrixXd read_grid_any(const std::filesystem::path& path);

}  // namespace cem
