#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cem {

/// Boundary layout of the unit square.
/// AllContact: the whole of the boundary carries the unilateral condition.
/// MixedDNC: Dirichlet on the top edge, contact on the bottom edge,
/// Neumann on the two sides.
enum class Geometry { AllContact, MixedDNC };

enum class BoundaryTag : std::uint8_t { Interior = 0, Dirichlet, Neumann, Contact };

/// Nested Cartesian grids on (0,1)^2. Fine cells are square (h = 1/nx_fine),
/// each coarse element is an exact block of fine cells. Nodes and cells are
/// numbered row-major (x fastest), fixed so file dumps are reproducible.
struct StructuredMesh {
  int nx_fine = 0;
  int ny_fine = 0;
  int Nx_coarse = 0;
  int Ny_coarse = 0;
  double h = 0.0;
  double H = 0.0;
  int fx = 0;  // fine cells per coarse cell, x
  int fy = 0;

  int n_nodes() const { return (nx_fine + 1) * (ny_fine + 1); }
  int n_cells() const { return nx_fine * ny_fine; }
  int n_coarse() const { return Nx_coarse * Ny_coarse; }

  int node_id(int i, int j) const { return j * (nx_fine + 1) + i; }
  int cell_id(int i, int j) const { return j * nx_fine + i; }
  int coarse_id(int I, int J) const { return J * Nx_coarse + I; }

  std::pair<int, int> node_ij(int node) const {
    return {node % (nx_fine + 1), node / (nx_fine + 1)};
  }
  std::pair<int, int> cell_ij(int cell) const { return {cell % nx_fine, cell / nx_fine}; }
  std::pair<int, int> coarse_ij(int ce) const { return {ce % Nx_coarse, ce / Nx_coarse}; }

  Eigen::Vector2d node_xy(int node) const {
    auto [i, j] = node_ij(node);
    return {i * h, j * h};
  }
  Eigen::Vector2d cell_center(int cell) const {
    auto [i, j] = cell_ij(cell);
    return {(i + 0.5) * h, (j + 0.5) * h};
  }

  /// Global node ids of a fine cell, counterclockwise from the lower left.
  std::array<int, 4> cell_nodes(int cell) const {
    auto [i, j] = cell_ij(cell);
    return {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)};
  }

  /// Coarse element containing a fine cell.
  int coarse_of_cell(int cell) const {
    auto [i, j] = cell_ij(cell);
    return coarse_id(i / fx, j / fy);
  }

  std::vector<int> coarse_fine_cells(int ce) const;
  std::vector<int> coarse_fine_nodes(int ce) const;

  bool node_on_boundary(int node) const {
    auto [i, j] = node_ij(node);
    return i == 0 || j == 0 || i == nx_fine || j == ny_fine;
  }
};

/// A fine boundary segment between two adjacent boundary nodes.
struct BoundaryEdge {
  int n0 = -1;
  int n1 = -1;
  double len = 0.0;
};

struct BoundarySpec {
  Geometry geometry = Geometry::AllContact;
  std::vector<BoundaryTag> node_tag;       // one per fine node
  std::vector<BoundaryEdge> contact_edges; // all fine edges of Gamma_C
  std::vector<BoundaryEdge> neumann_edges; // all fine edges of Gamma_N
  std::vector<int> contact_nodes;          // ascending
  std::vector<int> dirichlet_nodes;        // ascending

  bool has_dirichlet() const { return !dirichlet_nodes.empty(); }
  bool is_contact(int node) const { return node_tag[node] == BoundaryTag::Contact; }
  bool is_dirichlet(int node) const { return node_tag[node] == BoundaryTag::Dirichlet; }

  /// Lumped trace weight per contact node over a subset of contact edges:
  /// half the length of every adjacent edge in the subset. Returned dense over
  /// all fine nodes (zero off Gamma_C).
  Eigen::VectorXd lumped_contact_weights(int n_nodes,
                                         const std::vector<BoundaryEdge>& edges) const;
  Eigen::VectorXd lumped_contact_weights(int n_nodes) const {
    return lumped_contact_weights(n_nodes, contact_edges);
  }
};

std::pair<StructuredMesh, BoundarySpec> build_mesh(int nx_fine, int Nx_coarse,
                                                   Geometry geometry);

/// A coarse element grown by m layers of coarse neighbours, clipped at the
/// domain boundary. Fine nodes form a rectangle, so local indices are pure
/// arithmetic: local = (j - j_lo) * width + (i - i_lo).
struct OversampleDomain {
  int center = -1;  // coarse index
  int layers = 0;
  int I0 = 0, J0 = 0, I1 = 0, J1 = 0;  // inclusive coarse-cell range

  int i_lo = 0, j_lo = 0, i_hi = 0, j_hi = 0;  // inclusive fine-node range

  std::vector<int> coarse_cells;
  std::vector<int> fine_cells;
  std::vector<std::uint8_t> node_fixed;  // per local node: zero BC applies

  int node_width() const { return i_hi - i_lo + 1; }
  int node_height() const { return j_hi - j_lo + 1; }
  int n_nodes() const { return node_width() * node_height(); }

  bool contains_node(int i, int j) const {
    return i >= i_lo && i <= i_hi && j >= j_lo && j <= j_hi;
  }
  int local_node(int i, int j) const { return (j - j_lo) * node_width() + (i - i_lo); }
  int global_node(int local, const StructuredMesh& mesh) const {
    return mesh.node_id(i_lo + local % node_width(), j_lo + local / node_width());
  }
  bool covers_whole_domain(const StructuredMesh& mesh) const {
    return I0 == 0 && J0 == 0 && I1 == mesh.Nx_coarse - 1 && J1 == mesh.Ny_coarse - 1;
  }
};

OversampleDomain oversample(const StructuredMesh& mesh, const BoundarySpec& spec, int i,
                            int m);

}  // namespace cem
