#include "cem/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "cem/fem.hpp"

namespace cem {

void local_element_forms(const StructuredMesh& mesh, const PermField& field,
                         const SpectralWeight& weight, const BoundarySpec& spec, int i,
                         const Eigen::VectorXd& b_node, Eigen::MatrixXd& a_plus_c,
                         Eigen::MatrixXd& s, std::vector<int>& nodes) {
  nodes = mesh.coarse_fine_nodes(i);
  const int n = static_cast<int>(nodes.size());
  auto [I, J] = mesh.coarse_ij(i);
  const int i_lo = I * mesh.fx, j_lo = J * mesh.fy;
  const int width = mesh.fx + 1;
  auto local_of = [&](int global) {
    auto [gi, gj] = mesh.node_ij(global);
    return (gj - j_lo) * width + (gi - i_lo);
  };

  a_plus_c = Eigen::MatrixXd::Zero(n, n);
  s = Eigen::MatrixXd::Zero(n, n);
  const Eigen::Matrix4d ke = reference_cell_stiffness();
  const Eigen::Matrix4d me = reference_cell_mass();
  const double area = mesh.h * mesh.h;
  for (int c : mesh.coarse_fine_cells(i)) {
    const auto cn = mesh.cell_nodes(c);
    int loc[4];
    for (int a = 0; a < 4; ++a) loc[a] = local_of(cn[a]);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        a_plus_c(loc[a], loc[b]) += field.cell_kappa[c] * ke(a, b);
        s(loc[a], loc[b]) += area * weight.cell_value[c] * me(a, b);
      }
  }

  // Lumped contact trace over the element's own share of Gamma_C.
  for (const auto& e : spec.contact_edges) {
    auto [i0, j0] = mesh.node_ij(e.n0);
    auto [i1, j1] = mesh.node_ij(e.n1);
    const bool inside = i0 >= i_lo && i0 <= i_lo + mesh.fx && j0 >= j_lo &&
                        j0 <= j_lo + mesh.fy && i1 >= i_lo && i1 <= i_lo + mesh.fx &&
                        j1 >= j_lo && j1 <= j_lo + mesh.fy;
    if (!inside) continue;
    for (int g : {e.n0, e.n1}) {
      const double b = b_node[g];
      if (b < 0.0) throw std::invalid_argument("local_element_forms: negative b");
      a_plus_c(local_of(g), local_of(g)) += b * 0.5 * e.len;
    }
  }
}

LocalEigenBasis solve_local_spectral(const StructuredMesh& mesh, const PermField& field,
                                     const SpectralWeight& weight, const BoundarySpec& spec,
                                     int i, const Eigen::VectorXd& b_node, int l) {
  LocalEigenBasis basis;
  basis.element = i;

  Eigen::MatrixXd ac, s;
  local_element_forms(mesh, field, weight, spec, i, b_node, ac, s, basis.nodes);
  const int n = static_cast<int>(basis.nodes.size());
  if (l < 1 || l > n)
    throw std::invalid_argument("solve_local_spectral: l out of range [1, n_local]");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(ac, s,
                                                               Eigen::ComputeEigenvectors |
                                                                   Eigen::Ax_lBx);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("solve_local_spectral: eigensolver failed (S_i not SPD?)");

  basis.count = l;
  basis.eigenvalues = es.eigenvalues().head(l);
  basis.vectors = es.eigenvectors().leftCols(l);

  // Reproducible sign convention: largest-magnitude entry positive.
  for (int j = 0; j < l; ++j) {
    int idx = 0;
    basis.vectors.col(j).cwiseAbs().maxCoeff(&idx);
    if (basis.vectors(idx, j) < 0.0) basis.vectors.col(j) *= -1.0;
  }
  basis.weighted_vectors = s * basis.vectors;

  basis.contact_fingerprint.resize(n);
  for (int k = 0; k < n; ++k) {
    const int g = basis.nodes[k];
    basis.contact_fingerprint[k] = spec.is_contact(g) ? b_node[g] : 0.0;
  }
  return basis;
}

}  // namespace cem
