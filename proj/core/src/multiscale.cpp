#include "cem/multiscale.hpp"

#include <algorithm>
#include <fstream>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "parallel_for.hpp"

namespace cem {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// The local constrained-minimization system on an oversampled domain:
/// operator (stiffness + contact trace + B B^T) over the free nodes, where
/// the columns of B are the weighted auxiliary eigenvectors of every coarse
/// element contained in the domain. The right-hand side of basis function
/// (i, j) is exactly the column of B belonging to (i, j).
struct LocalSystem {
  std::vector<int> free_of_local;  // -1 where the zero boundary condition holds
  std::vector<int> free_global;
  SparseMat B;
  std::vector<int> center_cols;
  std::optional<SpdFactorization> fact;
};

LocalSystem build_local_system(const StructuredMesh& mesh, const BoundarySpec& spec,
                               const PermField& field, const SpectralWeight& weight,
                               const std::vector<LocalEigenBasis>& bases,
                               const OversampleDomain& dom, int center,
                               const Eigen::VectorXd& b_node) {
  LocalSystem sys;
  const int n_local = dom.n_nodes();
  sys.free_of_local.assign(n_local, -1);
  for (int lo = 0; lo < n_local; ++lo) {
    if (dom.node_fixed[lo]) continue;
    sys.free_of_local[lo] = static_cast<int>(sys.free_global.size());
    sys.free_global.push_back(dom.global_node(lo, mesh));
  }
  const int n_free = static_cast<int>(sys.free_global.size());

  auto local_of_global = [&](int g) {
    auto [gi, gj] = mesh.node_ij(g);
    return dom.local_node(gi, gj);
  };

  std::vector<Eigen::Triplet<double>> at;
  at.reserve(dom.fine_cells.size() * 16);
  const Eigen::Matrix4d ke = reference_cell_stiffness();
  for (int c : dom.fine_cells) {
    const auto cn = mesh.cell_nodes(c);
    int fr[4];
    for (int a = 0; a < 4; ++a) fr[a] = sys.free_of_local[local_of_global(cn[a])];
    const double kappa = field.cell_kappa[c];
    for (int a = 0; a < 4; ++a) {
      if (fr[a] < 0) continue;
      for (int b = 0; b < 4; ++b)
        if (fr[b] >= 0) at.emplace_back(fr[a], fr[b], kappa * ke(a, b));
    }
  }
  // Lumped Robin trace on the domain's share of Gamma_C.
  for (const auto& e : spec.contact_edges) {
    auto [i0, j0] = mesh.node_ij(e.n0);
    auto [i1, j1] = mesh.node_ij(e.n1);
    if (!dom.contains_node(i0, j0) || !dom.contains_node(i1, j1)) continue;
    for (int g : {e.n0, e.n1}) {
      const int fr = sys.free_of_local[local_of_global(g)];
      if (fr >= 0 && b_node[g] != 0.0)
        at.emplace_back(fr, fr, b_node[g] * 0.5 * e.len);
    }
  }
  SparseMat a_loc(n_free, n_free);
  a_loc.setFromTriplets(at.begin(), at.end());

  int n_cols = 0;
  for (int ce : dom.coarse_cells) n_cols += bases[ce].count;
  std::vector<Eigen::Triplet<double>> bt;
  int col = 0;
  for (int ce : dom.coarse_cells) {
    const LocalEigenBasis& eb = bases[ce];
    for (int j = 0; j < eb.count; ++j, ++col) {
      if (ce == center) sys.center_cols.push_back(col);
      for (size_t k = 0; k < eb.nodes.size(); ++k) {
        const int fr = sys.free_of_local[local_of_global(eb.nodes[k])];
        if (fr >= 0) bt.emplace_back(fr, col, eb.weighted_vectors(k, j));
      }
    }
  }
  sys.B.resize(n_free, n_cols);
  sys.B.setFromTriplets(bt.begin(), bt.end());

  SparseMat bT = sys.B.transpose();
  SparseMat op = a_loc + SparseMat(sys.B * bT);
  sys.fact.emplace(op);
  return sys;
}

Eigen::VectorXd corrector_rhs(const StructuredMesh& mesh, const BoundarySpec& spec,
                              const OversampleDomain& dom,
                              const std::vector<int>& free_of_local, int center,
                              const ScalarField2D& p) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(
      static_cast<int>(std::count_if(free_of_local.begin(), free_of_local.end(),
                                     [](int v) { return v >= 0; })));
  auto [I, J] = mesh.coarse_ij(center);
  const int i_lo = I * mesh.fx, i_hi = (I + 1) * mesh.fx;
  const int j_lo = J * mesh.fy, j_hi = (J + 1) * mesh.fy;
  const double g = 0.5 / std::sqrt(3.0);
  for (const auto& e : spec.neumann_edges) {
    auto [i0, j0] = mesh.node_ij(e.n0);
    auto [i1, j1] = mesh.node_ij(e.n1);
    const bool on_center = i0 >= i_lo && i0 <= i_hi && j0 >= j_lo && j0 <= j_hi &&
                           i1 >= i_lo && i1 <= i_hi && j1 >= j_lo && j1 <= j_hi;
    if (!on_center) continue;
    const Eigen::Vector2d a = mesh.node_xy(e.n0), b = mesh.node_xy(e.n1);
    const int f0 = free_of_local[dom.local_node(i0, j0)];
    const int f1 = free_of_local[dom.local_node(i1, j1)];
    for (double s : {0.5 - g, 0.5 + g}) {
      const Eigen::Vector2d xy = (1 - s) * a + s * b;
      const double w = 0.5 * e.len * p(xy.x(), xy.y());
      if (f0 >= 0) rhs[f0] += w * (1 - s);
      if (f1 >= 0) rhs[f1] += w * s;
    }
  }
  return rhs;
}

Eigen::VectorXd scatter_global(const StructuredMesh& mesh, const std::vector<int>& globals,
                               const Eigen::VectorXd& local) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (size_t k = 0; k < globals.size(); ++k) out[globals[k]] += local[k];
  return out;
}

}  // namespace

std::vector<LocalEigenBasis> build_all_eigenbases(const StructuredMesh& mesh,
                                                  const PermField& field,
                                                  const SpectralWeight& weight,
                                                  const BoundarySpec& spec,
                                                  const Eigen::VectorXd& b_node, int l) {
  std::vector<LocalEigenBasis> bases(mesh.n_coarse());
  detail::parallel_for(mesh.n_coarse(), [&](int i) {
    bases[i] = solve_local_spectral(mesh, field, weight, spec, i, b_node, l);
  });
  return bases;
}

AuxCoefficients aux_project(const std::vector<LocalEigenBasis>& bases,
                            const Eigen::VectorXd& v_fine) {
  AuxCoefficients c;
  c.per_element.resize(bases.size());
  for (size_t i = 0; i < bases.size(); ++i) {
    const LocalEigenBasis& eb = bases[i];
    Eigen::VectorXd restricted(eb.nodes.size());
    for (size_t k = 0; k < eb.nodes.size(); ++k) restricted[k] = v_fine[eb.nodes[k]];
    c.per_element[i] = eb.weighted_vectors.transpose() * restricted;
  }
  return c;
}

AuxCoefficients aux_project_pieces(const std::vector<LocalEigenBasis>& bases,
                                   const std::vector<Eigen::VectorXd>& pieces) {
  AuxCoefficients c;
  c.per_element.resize(bases.size());
  for (size_t i = 0; i < bases.size(); ++i)
    c.per_element[i] = bases[i].weighted_vectors.transpose() * pieces[i];
  return c;
}

Eigen::VectorXd aux_assemble(const std::vector<LocalEigenBasis>& bases, int n_nodes,
                             const AuxCoefficients& coeffs) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_nodes);
  for (size_t i = 0; i < bases.size(); ++i) {
    const LocalEigenBasis& eb = bases[i];
    const Eigen::VectorXd piece = eb.vectors * coeffs.per_element[i];
    for (size_t k = 0; k < eb.nodes.size(); ++k) out[eb.nodes[k]] += piece[k];
  }
  return out;
}

Eigen::VectorXd project_aux(const std::vector<LocalEigenBasis>& bases, int n_nodes,
                            const Eigen::VectorXd& v_fine) {
  return aux_assemble(bases, n_nodes, aux_project(bases, v_fine));
}

Eigen::VectorXd build_basis(const StructuredMesh& mesh, const BoundarySpec& spec,
                            const PermField& field, const SpectralWeight& weight,
                            const std::vector<LocalEigenBasis>& bases, int i, int j, int m,
                            const Eigen::VectorXd& b_node) {
  const OversampleDomain dom = oversample(mesh, spec, i, m);
  LocalSystem sys = build_local_system(mesh, spec, field, weight, bases, dom, i, b_node);
  if (j < 0 || j >= static_cast<int>(sys.center_cols.size()))
    throw std::invalid_argument("build_basis: eigenvector index out of range");
  const Eigen::VectorXd rhs = sys.B.col(sys.center_cols[j]);
  return scatter_global(mesh, sys.free_global, sys.fact->solve(rhs));
}

Eigen::VectorXd build_corrector(const StructuredMesh& mesh, const BoundarySpec& spec,
                                const PermField& field, const SpectralWeight& weight,
                                const std::vector<LocalEigenBasis>& bases, int i, int m,
                                const ScalarField2D& p, const Eigen::VectorXd& b_node) {
  const OversampleDomain dom = oversample(mesh, spec, i, m);
  if (!p) return Eigen::VectorXd::Zero(mesh.n_nodes());
  LocalSystem sys = build_local_system(mesh, spec, field, weight, bases, dom, i, b_node);
  const Eigen::VectorXd rhs = corrector_rhs(mesh, spec, dom, sys.free_of_local, i, p);
  if (rhs.isZero(0.0)) return Eigen::VectorXd::Zero(mesh.n_nodes());
  return scatter_global(mesh, sys.free_global, sys.fact->solve(rhs));
}

MultiscaleSolver::MultiscaleSolver(const StructuredMesh& mesh, const BoundarySpec& spec,
                                   const PermField& field, const SpectralWeight& weight,
                                   MsConfig config, ScalarField2D p)
    : mesh_(mesh), spec_(spec), field_(field), weight_(weight), config_(config),
      p_(std::move(p)) {
  if (config_.oversample_layers < 1)
    throw std::invalid_argument("MultiscaleSolver: oversample_layers must be >= 1");
  stiffness_ = assemble_stiffness(mesh_, field_);
  eigenbases_.resize(mesh_.n_coarse());
  elements_.resize(mesh_.n_coarse());
  for (int i = 0; i < mesh_.n_coarse(); ++i)
    elements_[i].dom = oversample(mesh_, spec_, i, config_.oversample_layers);
}

int MultiscaleSolver::basis_dim() const {
  int d = 0;
  for (const auto& eb : eigenbases_) d += eb.count;
  return d;
}

Eigen::VectorXd MultiscaleSolver::psi_fingerprint_of(const ElementData& e,
                                                     const Eigen::VectorXd& b_node) const {
  std::vector<double> vals;
  for (int g : spec_.contact_nodes) {
    auto [gi, gj] = mesh_.node_ij(g);
    if (e.dom.contains_node(gi, gj)) vals.push_back(b_node[g]);
  }
  Eigen::VectorXd fp(static_cast<int>(vals.size()));
  for (size_t k = 0; k < vals.size(); ++k) fp[static_cast<int>(k)] = vals[k];
  return fp;
}

bool MultiscaleSolver::eig_needs_rebuild(int i, const Eigen::VectorXd& b_node) const {
  const LocalEigenBasis& eb = eigenbases_[i];
  if (eb.element != i) return true;
  for (size_t k = 0; k < eb.nodes.size(); ++k) {
    const int g = eb.nodes[k];
    const double want = spec_.is_contact(g) ? b_node[g] : 0.0;
    if (eb.contact_fingerprint[static_cast<int>(k)] != want) return true;
  }
  return false;
}

bool MultiscaleSolver::psi_needs_rebuild(int i, const Eigen::VectorXd& b_node) const {
  const ElementData& e = elements_[i];
  if (!e.valid) return true;
  const Eigen::VectorXd fp = psi_fingerprint_of(e, b_node);
  return fp.size() != e.psi_fingerprint.size() || fp != e.psi_fingerprint;
}

std::vector<int> MultiscaleSolver::refresh_set(const Eigen::VectorXd& b_node) const {
  std::vector<int> out;
  for (int i = 0; i < mesh_.n_coarse(); ++i)
    if (psi_needs_rebuild(i, b_node)) out.push_back(i);
  return out;
}

void MultiscaleSolver::rebuild_element(int i, const Eigen::VectorXd& b_node) {
  ElementData& e = elements_[i];
  LocalSystem sys =
      build_local_system(mesh_, spec_, field_, weight_, eigenbases_, e.dom, i, b_node);
  e.free_global = sys.free_global;
  const int l = static_cast<int>(sys.center_cols.size());
  e.psi.resize(static_cast<int>(sys.free_global.size()), l);
  for (int j = 0; j < l; ++j) {
    const Eigen::VectorXd rhs = sys.B.col(sys.center_cols[j]);
    e.psi.col(j) = sys.fact->solve(rhs);
  }
  if (p_) {
    const Eigen::VectorXd rhs = corrector_rhs(mesh_, spec_, e.dom, sys.free_of_local, i, p_);
    e.corrector = rhs.isZero(0.0) ? Eigen::VectorXd::Zero(rhs.size()) : sys.fact->solve(rhs);
  }
  e.psi_fingerprint = psi_fingerprint_of(e, b_node);
  e.valid = true;
}

void MultiscaleSolver::dump_basis(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < mesh_.n_coarse(); ++i) {
    const ElementData& e = elements_[i];
    if (!e.valid) throw std::runtime_error("dump_basis: solver has not been run");
    for (int j = 0; j < e.psi.cols(); ++j) {
      std::ofstream os(dir / ("psi_" + std::to_string(i) + "_" + std::to_string(j) +
                              ".bin"),
                       std::ios::binary);
      const std::uint64_t count = e.free_global.size();
      os.write(reinterpret_cast<const char*>(&count), 8);
      for (size_t k = 0; k < e.free_global.size(); ++k) {
        const std::uint64_t node = static_cast<std::uint64_t>(e.free_global[k]);
        const double value = e.psi(static_cast<int>(k), j);
        os.write(reinterpret_cast<const char*>(&node), 8);
        os.write(reinterpret_cast<const char*>(&value), 8);
      }
    }
  }
}

Eigen::VectorXd MultiscaleSolver::solve(const Eigen::VectorXd& b_node,
                                        const Eigen::VectorXd& fine_load) {
  stats_ = {};
  const auto t0 = Clock::now();

  std::vector<int> eig_todo;
  for (int i = 0; i < mesh_.n_coarse(); ++i)
    if (eig_needs_rebuild(i, b_node)) eig_todo.push_back(i);
  detail::parallel_for(static_cast<int>(eig_todo.size()), [&](int k) {
    eigenbases_[eig_todo[k]] = solve_local_spectral(
        mesh_, field_, weight_, spec_, eig_todo[k], b_node,
        config_.eigenvectors_per_element);
  });

  std::vector<int> psi_todo = refresh_set(b_node);
  detail::parallel_for(static_cast<int>(psi_todo.size()),
                       [&](int k) { rebuild_element(psi_todo[k], b_node); });
  stats_.elements_rebuilt = static_cast<int>(psi_todo.size());
  stats_.basis_ms = ms_since(t0);

  const auto t1 = Clock::now();
  const int n = mesh_.n_nodes();
  const int dofs = basis_dim();

  std::vector<Eigen::Triplet<double>> pt;
  for (int i = 0, col0 = 0; i < mesh_.n_coarse(); ++i) {
    const ElementData& e = elements_[i];
    for (int j = 0; j < e.psi.cols(); ++j)
      for (size_t k = 0; k < e.free_global.size(); ++k)
        pt.emplace_back(e.free_global[k], col0 + j, e.psi(static_cast<int>(k), j));
    col0 += static_cast<int>(e.psi.cols());
  }
  SparseMat psi_mat(n, dofs);
  psi_mat.setFromTriplets(pt.begin(), pt.end());

  Eigen::VectorXd np;
  if (p_) {
    np = Eigen::VectorXd::Zero(n);
    for (const auto& e : elements_)
      for (size_t k = 0; k < e.free_global.size(); ++k)
        np[e.free_global[k]] += e.corrector[static_cast<int>(k)];
  }

  const SparseMat trace = assemble_contact_trace(mesh_, spec_, b_node);
  const SparseMat ac = stiffness_ + trace;
  Eigen::VectorXd rhs_fine = fine_load;
  if (p_) rhs_fine -= ac * np;
  const Eigen::VectorXd f_coarse = psi_mat.transpose() * rhs_fine;
  const SparseMat w_mat = ac * psi_mat;

  Eigen::VectorXd w;
  if (dofs <= 4000) {
    const Eigen::MatrixXd g_mat = Eigen::MatrixXd(psi_mat.transpose() * w_mat);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g_mat);
    w = ldlt.solve(f_coarse);
    const double scale =
        f_coarse.norm() + g_mat.lpNorm<Eigen::Infinity>() * w.norm() + 1e-300;
    if (ldlt.info() != Eigen::Success || !w.allFinite() ||
        (g_mat * w - f_coarse).norm() > 1e-9 * scale) {
      // Rank-deficient coarse space (l at full local dimension); the Galerkin
      // solution is still unique as a fine-grid function.
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(g_mat);
      w = cod.solve(f_coarse);
    }
  } else {
    const SparseMat g_sparse = SparseMat(psi_mat.transpose() * w_mat);
    Eigen::SimplicialLDLT<SparseMat> ldlt(g_sparse);
    if (ldlt.info() != Eigen::Success)
      throw SolveError("MultiscaleSolver: coarse factorization failed", {});
    w = ldlt.solve(f_coarse);
    if (!w.allFinite())
      throw SolveError("MultiscaleSolver: coarse system is singular", {});
  }

  Eigen::VectorXd u = psi_mat * w;
  if (p_) u += np;
  stats_.coarse_ms = ms_since(t1);
  return u;
}

}  // namespace cem
