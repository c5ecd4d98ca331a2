#include "cem/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cem {

namespace {

[[noreturn]] void fail(const std::filesystem::path& p, const std::string& what) {
  throw std::runtime_error(p.string() + ": " + what);
}

}  // namespace

void write_grid_csv(const std::filesystem::path& path, const Eigen::MatrixXd& grid) {
  std::ofstream os(path);
  if (!os) fail(path, "cannot open for writing");
  os.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      if (c) os << ',';
      os << grid(r, c);
    }
    os << '\n';
  }
  if (!os) fail(path, "write failed");
}

Eigen::MatrixXd read_grid_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(path, "cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    if (!rows.empty() && row.size() != rows.front().size())
      fail(path, "ragged rows in CSV grid");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(path, "empty CSV grid");
  Eigen::MatrixXd g(rows.size(), rows.front().size());
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = rows[r][c];
  return g;
}

void write_grid_bin(const std::filesystem::path& path, const Eigen::MatrixXd& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open for writing");
  const std::uint64_t rows = static_cast<std::uint64_t>(grid.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(grid.cols());
  os.write(reinterpret_cast<const char*>(&rows), 8);
  os.write(reinterpret_cast<const char*>(&cols), 8);
  std::vector<double> buf(grid.cols());
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) buf[c] = grid(r, c);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
  if (!os) fail(path, "write failed");
}

Eigen::MatrixXd read_grid_bin(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open");
  std::uint64_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&rows), 8);
  is.read(reinterpret_cast<char*>(&cols), 8);
  if (!is || rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    fail(path, "bad binary grid header");
  Eigen::MatrixXd g(rows, cols);
  std::vector<double> buf(cols);
  for (std::uint64_t r = 0; r < rows; ++r) {
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(cols * sizeof(double)));
    if (!is) fail(path, "truncated binary grid");
    for (std::uint64_t c = 0; c < cols; ++c) g(r, c) = buf[c];
  }
  return g;
}

Eigen::MatrixXd read_grid_any(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return read_grid_bin(path);
  return read_grid_csv(path);
}

}  // namespace cem
