#include "cem/mesh.hpp"

#include <algorithm>
#include <stdexcept>

namespace cem {

std::vector<int> StructuredMesh::coarse_fine_cells(int ce) const {
  auto [I, J] = coarse_ij(ce);
  std::vector<int> cells;
  cells.reserve(fx * fy);
  for (int j = J * fy; j < (J + 1) * fy; ++j)
    for (int i = I * fx; i < (I + 1) * fx; ++i) cells.push_back(cell_id(i, j));
  return cells;
}

std::vector<int> StructuredMesh::coarse_fine_nodes(int ce) const {
  auto [I, J] = coarse_ij(ce);
  std::vector<int> nodes;
  nodes.reserve((fx + 1) * (fy + 1));
  for (int j = J * fy; j <= (J + 1) * fy; ++j)
    for (int i = I * fx; i <= (I + 1) * fx; ++i) nodes.push_back(node_id(i, j));
  return nodes;
}

Eigen::VectorXd BoundarySpec::lumped_contact_weights(
    int n_nodes, const std::vector<BoundaryEdge>& edges) const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n_nodes);
  for (const auto& e : edges) {
    w[e.n0] += 0.5 * e.len;
    w[e.n1] += 0.5 * e.len;
  }
  return w;
}

namespace {

void push_edge_run(const StructuredMesh& m, std::vector<BoundaryEdge>& out, int i0,
                   int j0, int di, int dj, int count) {
  for (int k = 0; k < count; ++k) {
    int a = m.node_id(i0 + k * di, j0 + k * dj);
    int b = m.node_id(i0 + (k + 1) * di, j0 + (k + 1) * dj);
    out.push_back({a, b, m.h});
  }
}

}  // namespace

std::pair<StructuredMesh, BoundarySpec> build_mesh(int nx_fine, int Nx_coarse,
                                                   Geometry geometry) {
  if (Nx_coarse < 2) throw std::invalid_argument("build_mesh: Nx_coarse must be >= 2");
  if (nx_fine % Nx_coarse != 0)
    throw std::invalid_argument("build_mesh: nx_fine must be divisible by Nx_coarse");
  if (nx_fine < 2 * Nx_coarse)
    throw std::invalid_argument("build_mesh: nx_fine must be >= 2 * Nx_coarse");

  StructuredMesh m;
  m.nx_fine = nx_fine;
  m.ny_fine = nx_fine;
  m.Nx_coarse = Nx_coarse;
  m.Ny_coarse = Nx_coarse;
  m.h = 1.0 / nx_fine;
  m.H = 1.0 / Nx_coarse;
  m.fx = nx_fine / Nx_coarse;
  m.fy = m.fx;

  BoundarySpec spec;
  spec.geometry = geometry;
  spec.node_tag.assign(m.n_nodes(), BoundaryTag::Interior);

  auto set_tag = [&](int node, BoundaryTag tag) {
    // Dirichlet dominates at shared corners.
    if (spec.node_tag[node] == BoundaryTag::Dirichlet) return;
    if (tag == BoundaryTag::Dirichlet || spec.node_tag[node] == BoundaryTag::Interior)
      spec.node_tag[node] = tag;
  };

  const int nx = m.nx_fine, ny = m.ny_fine;
  if (geometry == Geometry::AllContact) {
    for (int i = 0; i <= nx; ++i) {
      set_tag(m.node_id(i, 0), BoundaryTag::Contact);
      set_tag(m.node_id(i, ny), BoundaryTag::Contact);
    }
    for (int j = 0; j <= ny; ++j) {
      set_tag(m.node_id(0, j), BoundaryTag::Contact);
      set_tag(m.node_id(nx, j), BoundaryTag::Contact);
    }
    push_edge_run(m, spec.contact_edges, 0, 0, 1, 0, nx);
    push_edge_run(m, spec.contact_edges, 0, ny, 1, 0, nx);
    push_edge_run(m, spec.contact_edges, 0, 0, 0, 1, ny);
    push_edge_run(m, spec.contact_edges, nx, 0, 0, 1, ny);
  } else {
    // Dirichlet first so it wins the top corners.
    for (int i = 0; i <= nx; ++i) set_tag(m.node_id(i, ny), BoundaryTag::Dirichlet);
    for (int i = 0; i <= nx; ++i) set_tag(m.node_id(i, 0), BoundaryTag::Contact);
    for (int j = 1; j < ny; ++j) {
      set_tag(m.node_id(0, j), BoundaryTag::Neumann);
      set_tag(m.node_id(nx, j), BoundaryTag::Neumann);
    }
    push_edge_run(m, spec.contact_edges, 0, 0, 1, 0, nx);
    push_edge_run(m, spec.neumann_edges, 0, 0, 0, 1, ny);
    push_edge_run(m, spec.neumann_edges, nx, 0, 0, 1, ny);
  }

  for (int n = 0; n < m.n_nodes(); ++n) {
    if (spec.node_tag[n] == BoundaryTag::Contact) spec.contact_nodes.push_back(n);
    if (spec.node_tag[n] == BoundaryTag::Dirichlet) spec.dirichlet_nodes.push_back(n);
  }
  return {m, spec};
}

OversampleDomain oversample(const StructuredMesh& mesh, const BoundarySpec& spec, int i,
                            int m) {
  if (m < 1) throw std::invalid_argument("oversample: m must be >= 1");
  if (i < 0 || i >= mesh.n_coarse())
    throw std::invalid_argument("oversample: coarse index out of range");

  auto [I, J] = mesh.coarse_ij(i);
  OversampleDomain d;
  d.center = i;
  d.layers = m;
  d.I0 = std::max(0, I - m);
  d.J0 = std::max(0, J - m);
  d.I1 = std::min(mesh.Nx_coarse - 1, I + m);
  d.J1 = std::min(mesh.Ny_coarse - 1, J + m);

  for (int cj = d.J0; cj <= d.J1; ++cj)
    for (int ci = d.I0; ci <= d.I1; ++ci) d.coarse_cells.push_back(mesh.coarse_id(ci, cj));

  d.i_lo = d.I0 * mesh.fx;
  d.i_hi = (d.I1 + 1) * mesh.fx;
  d.j_lo = d.J0 * mesh.fy;
  d.j_hi = (d.J1 + 1) * mesh.fy;

  for (int j = d.j_lo; j < d.j_hi; ++j)
    for (int ii = d.i_lo; ii < d.i_hi; ++ii) d.fine_cells.push_back(mesh.cell_id(ii, j));

  d.node_fixed.assign(d.n_nodes(), 0);
  for (int j = d.j_lo; j <= d.j_hi; ++j) {
    for (int ii = d.i_lo; ii <= d.i_hi; ++ii) {
      const bool on_rect_border = ii == d.i_lo || ii == d.i_hi || j == d.j_lo || j == d.j_hi;
      if (!on_rect_border) continue;
      const int g = mesh.node_id(ii, j);
      if (mesh.node_on_boundary(g)) {
        if (spec.node_tag[g] == BoundaryTag::Dirichlet) d.node_fixed[d.local_node(ii, j)] = 1;
      } else {
        d.node_fixed[d.local_node(ii, j)] = 1;  // interior cut: v = 0 on dK^m within Omega
      }
    }
  }
  return d;
}

}  // namespace cem
