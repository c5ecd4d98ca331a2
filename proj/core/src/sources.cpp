#include "cem/sources.hpp"

#include <stdexcept>

namespace cem {

Eigen::VectorXd cell_table(const StructuredMesh& mesh, const ScalarField2D& f) {
  Eigen::VectorXd t(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Eigen::Vector2d xy = mesh.cell_center(c);
    t[c] = f(xy.x(), xy.y());
  }
  return t;
}

Eigen::VectorXd assemble_source_load(const StructuredMesh& mesh, int which) {
  switch (which) {
    case 1: return assemble_load(mesh, source_f1);
    case 2: return assemble_load_cellwise(mesh, cell_table(mesh, source_f2));
    case 3: return assemble_load_cellwise(mesh, cell_table(mesh, source_f3));
    default: throw std::invalid_argument("assemble_source_load: expected 1, 2 or 3");
  }
}

}  // namespace cem
