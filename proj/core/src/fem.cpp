#include "cem/fem.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cem {

Eigen::Matrix4d reference_cell_stiffness() {
  Eigen::Matrix4d k;
  // Integrated gradients of the bilinear bases on a square; independent of h.
  k << 4, -1, -2, -1,
      -1, 4, -1, -2,
      -2, -1, 4, -1,
      -1, -2, -1, 4;
  return k / 6.0;
}

Eigen::Matrix4d reference_cell_mass() {
  Eigen::Matrix4d m;
  m << 4, 2, 1, 2,
       2, 4, 2, 1,
       1, 2, 4, 2,
       2, 1, 2, 4;
  return m / 36.0;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMat from_triplets(int n, Triplets& t) {
  SparseMat a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

void add_cell_matrix(Triplets& t, const std::array<int, 4>& nodes,
                     const Eigen::Matrix4d& ke, double scale) {
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) t.emplace_back(nodes[a], nodes[b], scale * ke(a, b));
}

}  // namespace

SparseMat assemble_stiffness(const StructuredMesh& mesh, const PermField& field,
                             std::span<const int> cells) {
  const Eigen::Matrix4d ke = reference_cell_stiffness();
  Triplets t;
  t.reserve(cells.size() * 16);
  for (int c : cells) add_cell_matrix(t, mesh.cell_nodes(c), ke, field.cell_kappa[c]);
  return from_triplets(mesh.n_nodes(), t);
}

SparseMat assemble_stiffness(const StructuredMesh& mesh, const PermField& field) {
  std::vector<int> all(mesh.n_cells());
  std::iota(all.begin(), all.end(), 0);
  return assemble_stiffness(mesh, field, all);
}

SparseMat assemble_weighted_mass(const StructuredMesh& mesh,
                                 const Eigen::VectorXd& cell_weight,
                                 std::span<const int> cells) {
  const Eigen::Matrix4d me = reference_cell_mass();
  const double area = mesh.h * mesh.h;
  Triplets t;
  t.reserve(cells.size() * 16);
  for (int c : cells) add_cell_matrix(t, mesh.cell_nodes(c), me, area * cell_weight[c]);
  return from_triplets(mesh.n_nodes(), t);
}

SparseMat assemble_weighted_mass(const StructuredMesh& mesh,
                                 const Eigen::VectorXd& cell_weight) {
  std::vector<int> all(mesh.n_cells());
  std::iota(all.begin(), all.end(), 0);
  return assemble_weighted_mass(mesh, cell_weight, all);
}

SparseMat assemble_mass(const StructuredMesh& mesh) {
  return assemble_weighted_mass(mesh, Eigen::VectorXd::Ones(mesh.n_cells()));
}

SparseMat assemble_contact_trace(const StructuredMesh& mesh, const BoundarySpec& spec,
                                 const Eigen::VectorXd& b_node,
                                 std::span<const BoundaryEdge> edges) {
  Triplets t;
  t.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    for (int n : {e.n0, e.n1}) {
      const double b = b_node[n];
      if (b < 0.0) throw std::invalid_argument("assemble_contact_trace: negative b");
      if (b != 0.0) t.emplace_back(n, n, b * 0.5 * e.len);
    }
  }
  (void)spec;
  return from_triplets(mesh.n_nodes(), t);
}

SparseMat assemble_contact_trace(const StructuredMesh& mesh, const BoundarySpec& spec,
                                 const Eigen::VectorXd& b_node) {
  return assemble_contact_trace(mesh, spec, b_node, spec.contact_edges);
}

SparseMat assemble_contact_trace_consistent(const StructuredMesh& mesh,
                                            const Eigen::VectorXd& b_node,
                                            std::span<const BoundaryEdge> edges) {
  Triplets t;
  for (const auto& e : edges) {
    // 1D linear trace mass with b interpolated linearly along the edge,
    // integrated exactly (cubic integrand, 2-point Gauss).
    const double b0 = b_node[e.n0], b1 = b_node[e.n1];
    if (b0 < 0.0 || b1 < 0.0)
      throw std::invalid_argument("assemble_contact_trace_consistent: negative b");
    const double g = 1.0 / std::sqrt(3.0);
    for (double s : {0.5 - 0.5 * g, 0.5 + 0.5 * g}) {
      const double w = 0.5 * e.len;
      const double b = (1 - s) * b0 + s * b1;
      const double n0 = 1 - s, n1 = s;
      t.emplace_back(e.n0, e.n0, w * b * n0 * n0);
      t.emplace_back(e.n0, e.n1, w * b * n0 * n1);
      t.emplace_back(e.n1, e.n0, w * b * n1 * n0);
      t.emplace_back(e.n1, e.n1, w * b * n1 * n1);
    }
  }
  return from_triplets(mesh.n_nodes(), t);
}

Eigen::VectorXd assemble_load(const StructuredMesh& mesh, const ScalarField2D& f) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(mesh.n_nodes());
  const double g = 0.5 / std::sqrt(3.0);
  const double gp[2] = {0.5 - g, 0.5 + g};
  const double h = mesh.h;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto [ci, cj] = mesh.cell_ij(c);
    const auto nodes = mesh.cell_nodes(c);
    const double x0 = ci * h, y0 = cj * h;
    for (double sx : gp)
      for (double sy : gp) {
        const double fv = f(x0 + sx * h, y0 + sy * h);
        const double w = 0.25 * h * h;
        const double shape[4] = {(1 - sx) * (1 - sy), sx * (1 - sy), sx * sy,
                                 (1 - sx) * sy};
        for (int a = 0; a < 4; ++a) load[nodes[a]] += w * fv * shape[a];
      }
  }
  return load;
}

Eigen::VectorXd assemble_load_cellwise(const StructuredMesh& mesh,
                                       const Eigen::VectorXd& f_cell) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(mesh.n_nodes());
  const double quarter_area = 0.25 * mesh.h * mesh.h;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double v = f_cell[c] * quarter_area;
    for (int n : mesh.cell_nodes(c)) load[n] += v;
  }
  return load;
}

Eigen::VectorXd assemble_neumann_load(const StructuredMesh& mesh, const BoundarySpec& spec,
                                      const ScalarField2D& p) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(mesh.n_nodes());
  const double g = 0.5 / std::sqrt(3.0);
  for (const auto& e : spec.neumann_edges) {
    const Eigen::Vector2d a = mesh.node_xy(e.n0), b = mesh.node_xy(e.n1);
    for (double s : {0.5 - g, 0.5 + g}) {
      const Eigen::Vector2d xy = (1 - s) * a + s * b;
      const double w = 0.5 * e.len * p(xy.x(), xy.y());
      load[e.n0] += w * (1 - s);
      load[e.n1] += w * s;
    }
  }
  return load;
}

void apply_dirichlet(SparseMat& A, const BoundarySpec& spec) {
  if (spec.dirichlet_nodes.empty()) return;
  std::vector<char> fixed(A.rows(), 0);
  for (int n : spec.dirichlet_nodes) fixed[n] = 1;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMat::InnerIterator it(A, k); it; ++it) {
      if (!fixed[it.row()] && !fixed[it.col()]) continue;
      it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    }
  A.prune(0.0);
}

void apply_dirichlet(SparseMat& A, Eigen::VectorXd& rhs, const BoundarySpec& spec) {
  apply_dirichlet(A, spec);
  for (int n : spec.dirichlet_nodes) rhs[n] = 0.0;
}

}  // namespace cem
