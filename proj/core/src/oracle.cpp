#include "cem/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace cem {
namespace oracle {

namespace {

double shape(int a, double sx, double sy) {
  switch (a) {
    case 0: return (1 - sx) * (1 - sy);
    case 1: return sx * (1 - sy);
    case 2: return sx * sy;
    default: return (1 - sx) * sy;
  }
}

Eigen::Vector2d shape_grad(int a, double sx, double sy, double h) {
  // Physical gradients on a square cell of side h.
  switch (a) {
    case 0: return {-(1 - sy) / h, -(1 - sx) / h};
    case 1: return {(1 - sy) / h, -sx / h};
    case 2: return {sy / h, sx / h};
    default: return {-sy / h, (1 - sx) / h};
  }
}

double power_iteration_lambda_max(const Eigen::SparseMatrix<double>& A, int iters = 200) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.rows());
  v[0] += 0.5;  // break symmetry for patterned matrices
  v.normalize();
  double lambda = 1.0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd w = A * v;
    lambda = w.norm();
    if (lambda == 0.0) return 1.0;
    v = w / lambda;
  }
  return lambda;
}

}  // namespace

Eigen::VectorXd solve_vi_projected(const Eigen::SparseMatrix<double>& A,
                                   const Eigen::VectorXd& F,
                                   std::span<const int> contact_nodes, double tol,
                                   long max_iter) {
  const double lambda_max = power_iteration_lambda_max(A);
  const double step = 1.0 / (1.01 * lambda_max);

  auto project = [&](Eigen::VectorXd& u) {
    for (int g : contact_nodes) u[g] = std::min(u[g], 0.0);
  };

  Eigen::VectorXd u = Eigen::VectorXd::Zero(A.rows());
  project(u);
  for (long it = 0; it < max_iter; ++it) {
    Eigen::VectorXd grad = A * u - F;
    Eigen::VectorXd trial = u - step * grad;
    project(trial);
    const double pg_norm = (u - trial).norm() / step;
    u = trial;
    if (pg_norm <= tol) return u;
  }
  throw std::runtime_error("solve_vi_projected: max_iter exceeded");
}

Eigen::MatrixXd naive_stiffness(const StructuredMesh& mesh, const PermField& field,
                                std::span<const int> cells) {
  const int n = mesh.n_nodes();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  for (int c : cells) {
    const auto nodes = mesh.cell_nodes(c);
    const double w = 0.25 * mesh.h * mesh.h * field.cell_kappa[c];
    for (double sx : pts)
      for (double sy : pts)
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            A(nodes[a], nodes[b]) +=
                w * shape_grad(a, sx, sy, mesh.h).dot(shape_grad(b, sx, sy, mesh.h));
  }
  return A;
}

Eigen::MatrixXd naive_stiffness(const StructuredMesh& mesh, const PermField& field) {
  std::vector<int> all(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) all[c] = c;
  return naive_stiffness(mesh, field, all);
}

Eigen::MatrixXd naive_weighted_mass(const StructuredMesh& mesh,
                                    const Eigen::VectorXd& cell_weight,
                                    std::span<const int> cells) {
  const int n = mesh.n_nodes();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  for (int c : cells) {
    const auto nodes = mesh.cell_nodes(c);
    const double w = 0.25 * mesh.h * mesh.h * cell_weight[c];
    for (double sx : pts)
      for (double sy : pts)
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            M(nodes[a], nodes[b]) += w * shape(a, sx, sy) * shape(b, sx, sy);
  }
  return M;
}

Eigen::MatrixXd naive_lumped_trace(const StructuredMesh& mesh,
                                   const Eigen::VectorXd& b_node,
                                   std::span<const BoundaryEdge> edges) {
  const int n = mesh.n_nodes();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges) {
    T(e.n0, e.n0) += b_node[e.n0] * 0.5 * e.len;
    T(e.n1, e.n1) += b_node[e.n1] * 0.5 * e.len;
  }
  return T;
}

Eigen::VectorXd dense_local_basis(const StructuredMesh& mesh, const BoundarySpec& spec,
                                  const PermField& field, const SpectralWeight& weight,
                                  const std::vector<LocalEigenBasis>& bases, int i, int j,
                                  int m, const Eigen::VectorXd& b_node) {
  const OversampleDomain dom = oversample(mesh, spec, i, m);
  const int n = mesh.n_nodes();

  std::vector<int> free_nodes;
  std::vector<char> is_free(n, 0);
  for (int lo = 0; lo < dom.n_nodes(); ++lo) {
    if (dom.node_fixed[lo]) continue;
    const int g = dom.global_node(lo, mesh);
    is_free[g] = 1;
    free_nodes.push_back(g);
  }
  std::sort(free_nodes.begin(), free_nodes.end());
  const int nf = static_cast<int>(free_nodes.size());
  std::vector<int> idx_of(n, -1);
  for (int k = 0; k < nf; ++k) idx_of[free_nodes[k]] = k;

  Eigen::MatrixXd stiff = Eigen::MatrixXd::Zero(n, n);
  {
    const double g = 0.5 / std::sqrt(3.0);
    const double pts[2] = {0.5 - g, 0.5 + g};
    for (int c : dom.fine_cells) {
      const auto nodes = mesh.cell_nodes(c);
      const double w = 0.25 * mesh.h * mesh.h * field.cell_kappa[c];
      for (double sx : pts)
        for (double sy : pts)
          for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
              stiff(nodes[a], nodes[b]) +=
                  w * shape_grad(a, sx, sy, mesh.h).dot(shape_grad(b, sx, sy, mesh.h));
    }
  }
  for (const auto& e : spec.contact_edges) {
    auto [i0, j0] = mesh.node_ij(e.n0);
    auto [i1, j1] = mesh.node_ij(e.n1);
    if (!dom.contains_node(i0, j0) || !dom.contains_node(i1, j1)) continue;
    stiff(e.n0, e.n0) += b_node[e.n0] * 0.5 * e.len;
    stiff(e.n1, e.n1) += b_node[e.n1] * 0.5 * e.len;
  }

  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(nf, nf);
  for (int r = 0; r < nf; ++r)
    for (int c = 0; c < nf; ++c) op(r, c) = stiff(free_nodes[r], free_nodes[c]);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
  for (int ce : dom.coarse_cells) {
    const LocalEigenBasis& eb = bases[ce];
    for (int jj = 0; jj < eb.count; ++jj) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(nf);
      for (size_t k = 0; k < eb.nodes.size(); ++k) {
        const int idx = idx_of[eb.nodes[k]];
        if (idx >= 0) col[idx] = eb.weighted_vectors(static_cast<int>(k), jj);
      }
      op += col * col.transpose();
      if (ce == i && jj == j) rhs = col;
    }
  }

  const Eigen::VectorXd x = Eigen::LDLT<Eigen::MatrixXd>(op).solve(rhs);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < nf; ++k) out[free_nodes[k]] = x[k];
  return out;
}

}  // namespace oracle
}  // namespace cem
