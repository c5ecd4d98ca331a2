#pragma once

#include <Eigen/Core>

#include "cem/fem.hpp"
#include "cem/mesh.hpp"

namespace cem {

/// The study's source terms. f1 is smooth; f2 (a +10 cross on a -10
/// background) and f3 (a +10 horizontal band) are piecewise constant with
/// region membership decided at fine-cell centers.
inline double source_f1(double x, double y) {
  return -2.0 * x + 3.0 * y +
         std::sin(2.0 * EIGEN_PI * x) * std::sin(2.0 * EIGEN_PI * y);
}

inline double source_f2(double x, double y) {
  const bool band_h = y > 3.0 / 8.0 && y < 5.0 / 8.0;
  const bool band_v = x > 3.0 / 8.0 && x < 5.0 / 8.0;
  return (band_h || band_v) ? 10.0 : -10.0;
}

inline double source_f3(double /*x*/, double y) {
  return (y > 0.5 && y < 0.75) ? 10.0 : -10.0;
}

/// Volume load for one of the built-in sources: Gauss quadrature for the
/// smooth f1, exact cell-center evaluation for the piecewise f2/f3.
Eigen::VectorXd assemble_source_load(const StructuredMesh& mesh, int which);

/// Per-cell table of a piecewise-constant source sampled at cell centers.
Eigen::VectorXd cell_table(const StructuredMesh& mesh, const ScalarField2D& f);

}  // namespace cem
