#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <fstream>
#include <random>

#include "cem/contact.hpp"
#include "cem/metrics.hpp"
#include "cem/multiscale.hpp"
#include "cem/oracle.hpp"
#include "cem/sources.hpp"

using namespace cem;

namespace {

struct Setup {
  StructuredMesh mesh;
  BoundarySpec spec;
  PermField field;
  SpectralWeight weight;
};

Setup make_setup(int nx, int Nx, Geometry g, double kappa_R, std::uint64_t seed = 1) {
  Setup s;
  std::tie(s.mesh, s.spec) = build_mesh(nx, Nx, g);
  s.field = synth_medium(MediumKind::Inclusions, seed, kappa_R, s.mesh);
  s.weight = spectral_weight(s.field, s.mesh);
  return s;
}

Eigen::VectorXd random_vector(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("multiscale");

TEST_CASE("auxiliary projection identities") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 1e3);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  const auto bases = build_all_eigenbases(s.mesh, s.field, s.weight, s.spec, b, 3);
  std::mt19937 rng(4);

  // Projecting an eigenfunction piece yields its own coefficient only.
  std::vector<Eigen::VectorXd> pieces(bases.size());
  for (size_t i = 0; i < bases.size(); ++i)
    pieces[i] = Eigen::VectorXd::Zero(static_cast<int>(bases[i].nodes.size()));
  pieces[5] = bases[5].vectors.col(1);
  const AuxCoefficients ortho = aux_project_pieces(bases, pieces);
  for (size_t i = 0; i < bases.size(); ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = (i == 5 && j == 1) ? 1.0 : 0.0;
      CHECK(ortho.per_element[i][j] == doctest::Approx(want).epsilon(1e-10).scale(1.0));
    }

  // Idempotence: re-projecting the projected pieces reproduces the
  // coefficients.
  const Eigen::VectorXd v = random_vector(s.mesh.n_nodes(), rng);
  const AuxCoefficients c = aux_project(bases, v);
  std::vector<Eigen::VectorXd> projected(bases.size());
  for (size_t i = 0; i < bases.size(); ++i)
    projected[i] = bases[i].vectors * c.per_element[i];
  const AuxCoefficients c2 = aux_project_pieces(bases, projected);
  for (size_t i = 0; i < bases.size(); ++i)
    CHECK((c2.per_element[i] - c.per_element[i]).lpNorm<Eigen::Infinity>() < 1e-10);

  // A vector s-orthogonal to every kept eigenvector projects to zero. The
  // coefficients are linear in v, so remove them with one least-squares
  // projection against the weighted eigenvector columns.
  Eigen::VectorXd w = random_vector(s.mesh.n_nodes(), rng);
  const int n_cols = static_cast<int>(bases.size()) * 3;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(s.mesh.n_nodes(), n_cols);
  int col = 0;
  for (const auto& eb : bases)
    for (int j = 0; j < eb.count; ++j, ++col)
      for (size_t k = 0; k < eb.nodes.size(); ++k)
        cols(eb.nodes[k], col) += eb.weighted_vectors(static_cast<int>(k), j);
  const Eigen::VectorXd w_perp =
      w - cols * (cols.transpose() * cols).ldlt().solve(cols.transpose() * w);
  const Eigen::VectorXd pi_perp = project_aux(bases, s.mesh.n_nodes(), w_perp);
  CHECK(pi_perp.lpNorm<Eigen::Infinity>() < 1e-10 * w.lpNorm<Eigen::Infinity>());
}

TEST_CASE("basis function solves the local variational identity") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 1e3, 3);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e4;
  const int l = 3, m = 1, elem = s.mesh.coarse_id(1, 0);
  const auto bases = build_all_eigenbases(s.mesh, s.field, s.weight, s.spec, b, l);
  const Eigen::VectorXd psi =
      build_basis(s.mesh, s.spec, s.field, s.weight, bases, elem, 1, m, b);

  const OversampleDomain dom = oversample(s.mesh, s.spec, elem, m);
  CHECK(psi.lpNorm<Eigen::Infinity>() > 0.0);
  // Support and boundary conditions.
  for (int g = 0; g < s.mesh.n_nodes(); ++g) {
    auto [gi, gj] = s.mesh.node_ij(g);
    if (!dom.contains_node(gi, gj)) CHECK(psi[g] == 0.0);
  }

  // Residual of the characterization against random admissible test vectors.
  const SparseMat a_dom = assemble_stiffness(s.mesh, s.field, dom.fine_cells);
  std::vector<BoundaryEdge> dom_edges;
  for (const auto& e : s.spec.contact_edges) {
    auto [i0, j0] = s.mesh.node_ij(e.n0);
    auto [i1, j1] = s.mesh.node_ij(e.n1);
    if (dom.contains_node(i0, j0) && dom.contains_node(i1, j1)) dom_edges.push_back(e);
  }
  const SparseMat c_dom = assemble_contact_trace(s.mesh, s.spec, b, dom_edges);
  std::mt19937 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(s.mesh.n_nodes());
    for (int lo = 0; lo < dom.n_nodes(); ++lo)
      if (!dom.node_fixed[lo])
        v[dom.global_node(lo, s.mesh)] = random_vector(1, rng)[0];
    const AuxCoefficients cp = aux_project(bases, psi);
    const AuxCoefficients cv = aux_project(bases, v);
    double lhs = psi.dot(a_dom * v) + psi.dot(c_dom * v);
    double rhs = 0.0;
    for (int ce : dom.coarse_cells) {
      lhs += cp.per_element[ce].dot(cv.per_element[ce]);
      if (ce == elem) rhs += cv.per_element[ce][1];
    }
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("zero target yields the zero basis function") {
  Setup s = make_setup(8, 2, Geometry::MixedDNC, 10.0);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  auto bases = build_all_eigenbases(s.mesh, s.field, s.weight, s.spec, b, 2);
  bases[0].weighted_vectors.col(1).setZero();  // kill the (0, 1) target
  const Eigen::VectorXd psi =
      build_basis(s.mesh, s.spec, s.field, s.weight, bases, 0, 1, 1, b);
  CHECK(psi.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("basis matches the dense reference solve when the domain is the whole square") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 1e3, 7);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e4;
  const auto bases = build_all_eigenbases(s.mesh, s.field, s.weight, s.spec, b, 2);
  const int m = 4;  // K_i^m covers the whole domain on a 4x4 coarse grid
  for (int elem : {0, 5, 10}) {
    CHECK(oversample(s.mesh, s.spec, elem, m).covers_whole_domain(s.mesh));
    for (int j = 0; j < 2; ++j) {
      const Eigen::VectorXd psi =
          build_basis(s.mesh, s.spec, s.field, s.weight, bases, elem, j, m, b);
      const Eigen::VectorXd ref = oracle::dense_local_basis(
          s.mesh, s.spec, s.field, s.weight, bases, elem, j, m, b);
      CHECK((psi - ref).lpNorm<Eigen::Infinity>() <
            1e-10 * (1.0 + ref.lpNorm<Eigen::Infinity>()));
    }
  }
}

TEST_CASE("correctors vanish without Neumann data") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 1e3);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  const auto bases = build_all_eigenbases(s.mesh, s.field, s.weight, s.spec, b, 2);

  const Eigen::VectorXd zero = build_corrector(s.mesh, s.spec, s.field, s.weight, bases,
                                               0, 2, nullptr, b);
  CHECK(zero.isZero(0.0));

  const ScalarField2D p = [](double, double) { return 3.0; };
  // Interior element: no share of Gamma_N.
  const Eigen::VectorXd interior = build_corrector(s.mesh, s.spec, s.field, s.weight,
                                                   bases, s.mesh.coarse_id(1, 1), 2, p, b);
  CHECK(interior.isZero(0.0));
  // Side element touching Gamma_N picks up the data.
  const Eigen::VectorXd side = build_corrector(s.mesh, s.spec, s.field, s.weight, bases,
                                               s.mesh.coarse_id(0, 1), 2, p, b);
  CHECK(side.lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("one-step solve: zero data and Galerkin orthogonality") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 1e3, 9);
  MultiscaleSolver solver(s.mesh, s.spec, s.field, s.weight, {2, 2});
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e4;

  const Eigen::VectorXd u0 =
      solver.solve(b, Eigen::VectorXd::Zero(s.mesh.n_nodes()));
  CHECK(u0.lpNorm<Eigen::Infinity>() < 1e-14);

  const Eigen::VectorXd load = assemble_source_load(s.mesh, 2);
  const Eigen::VectorXd u = solver.solve(b, load);
  for (int g : s.spec.dirichlet_nodes) CHECK(u[g] == 0.0);

  // The coarse residual tested column by column through the basis functions.
  const auto& bases = solver.eigenbases();
  const SparseMat ac =
      assemble_stiffness(s.mesh, s.field) + assemble_contact_trace(s.mesh, s.spec, b);
  const Eigen::VectorXd resid = ac * u - load;
  const double scale = load.lpNorm<Eigen::Infinity>() + 1.0;
  for (int elem = 0; elem < s.mesh.n_coarse(); ++elem)
    for (int j = 0; j < 2; ++j) {
      const Eigen::VectorXd psi =
          build_basis(s.mesh, s.spec, s.field, s.weight, bases, elem, j, 2, b);
      CHECK(std::abs(psi.dot(resid)) <= 1e-8 * scale);
    }
}

TEST_CASE("full local spaces reproduce the fine solution") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 1e3, 13);
  const int l_full = (s.mesh.fx + 1) * (s.mesh.fy + 1);
  MultiscaleSolver solver(s.mesh, s.spec, s.field, s.weight, {4, l_full});
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e4;

  const Eigen::VectorXd load = assemble_source_load(s.mesh, 2);
  const Eigen::VectorXd u_ms = solver.solve(b, load);

  SparseMat sys =
      assemble_stiffness(s.mesh, s.field) + assemble_contact_trace(s.mesh, s.spec, b);
  Eigen::VectorXd rhs = load;
  apply_dirichlet(sys, rhs, s.spec);
  auto [u_fe, rep] = solve_spd(sys, rhs);

  const SparseMat stiffness = assemble_stiffness(s.mesh, s.field);
  const double e_a = energy_norm(u_fe - u_ms, stiffness) / energy_norm(u_fe, stiffness);
  CHECK(e_a <= 1e-8);
}

TEST_CASE("refresh policy rebuilds exactly the affected neighbourhood") {
  Setup s = make_setup(16, 4, Geometry::AllContact, 1e3, 17);
  const int m = 1, l = 2;
  MultiscaleSolver solver(s.mesh, s.spec, s.field, s.weight, {m, l});
  const double eps = 1e-4;

  ActiveSet none;
  none.flags.assign(s.mesh.n_nodes(), 0);
  Eigen::VectorXd b0 = robin_coefficient(none, eps, s.mesh.n_nodes());
  const Eigen::VectorXd load = assemble_source_load(s.mesh, 1);
  (void)solver.solve(b0, load);
  CHECK(solver.refresh_set(b0).empty());

  // Activate one bottom-edge node: only domains containing it rebuild.
  ActiveSet one = none;
  const int node = s.mesh.node_id(6, 0);
  REQUIRE(s.spec.is_contact(node));
  one.flags[node] = 1;
  one.count = 1;
  const Eigen::VectorXd b1 = robin_coefficient(one, eps, s.mesh.n_nodes());
  const std::vector<int> refresh = solver.refresh_set(b1);
  CHECK(!refresh.empty());
  CHECK(static_cast<int>(refresh.size()) <= (2 * m + 1) * (2 * m + 1));
  for (int i = 0; i < s.mesh.n_coarse(); ++i) {
    const OversampleDomain d = oversample(s.mesh, s.spec, i, m);
    const bool contains = d.contains_node(6, 0);
    const bool listed =
        std::find(refresh.begin(), refresh.end(), i) != refresh.end();
    CHECK(contains == listed);
  }

  // Incremental rebuild equals a from-scratch solve.
  const Eigen::VectorXd u_incremental = solver.solve(b1, load);
  CHECK(solver.last_stats().elements_rebuilt == static_cast<int>(refresh.size()));
  MultiscaleSolver fresh(s.mesh, s.spec, s.field, s.weight, {m, l});
  const Eigen::VectorXd u_fresh = fresh.solve(b1, load);
  CHECK((u_incremental - u_fresh).lpNorm<Eigen::Infinity>() <=
        1e-12 * (1.0 + u_fresh.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("coarse operator is positive definite with a Dirichlet part") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 100.0, 19);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  const int l = 2, m = 1;
  const auto bases = build_all_eigenbases(s.mesh, s.field, s.weight, s.spec, b, l);
  const int dofs = s.mesh.n_coarse() * l;
  Eigen::MatrixXd psi_all(s.mesh.n_nodes(), dofs);
  int col = 0;
  for (int elem = 0; elem < s.mesh.n_coarse(); ++elem)
    for (int j = 0; j < l; ++j)
      psi_all.col(col++) =
          build_basis(s.mesh, s.spec, s.field, s.weight, bases, elem, j, m, b);
  const SparseMat a = assemble_stiffness(s.mesh, s.field);
  const Eigen::MatrixXd g = psi_all.transpose() * (a * psi_all);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("large coarse spaces take the sparse solve path and stay consistent") {
  // 48x48 coarse cells at l = 2 exceeds the dense-path threshold.
  Setup s = make_setup(96, 48, Geometry::MixedDNC, 10.0, 29);
  MultiscaleSolver solver(s.mesh, s.spec, s.field, s.weight, {1, 2});
  CHECK(solver.basis_dim() == 0);  // nothing built yet
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e4;
  const Eigen::VectorXd load = assemble_source_load(s.mesh, 2);
  const Eigen::VectorXd u = solver.solve(b, load);
  CHECK(solver.basis_dim() > 4000);
  CHECK(u.allFinite());
  // Galerkin residual against a sample of basis functions.
  const SparseMat ac =
      assemble_stiffness(s.mesh, s.field) + assemble_contact_trace(s.mesh, s.spec, b);
  const Eigen::VectorXd resid = ac * u - load;
  const double scale = load.lpNorm<Eigen::Infinity>() + 1.0;
  for (int elem : {0, 777, 1500, 2303}) {
    const Eigen::VectorXd psi = build_basis(s.mesh, s.spec, s.field, s.weight,
                                            solver.eigenbases(), elem, 1, 1, b);
    CHECK(std::abs(psi.dot(resid)) <= 1e-8 * scale);
  }
}

TEST_CASE("basis dump files reconstruct the basis functions") {
  Setup s = make_setup(8, 2, Geometry::MixedDNC, 10.0, 25);
  MultiscaleSolver solver(s.mesh, s.spec, s.field, s.weight, {1, 2});
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e3;
  (void)solver.solve(b, assemble_source_load(s.mesh, 2));

  const auto dir = std::filesystem::temp_directory_path() / "cem_basis_dump_test";
  std::filesystem::remove_all(dir);
  solver.dump_basis(dir);

  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    (void)entry;
    ++files;
  }
  CHECK(files == s.mesh.n_coarse() * 2);

  std::ifstream is(dir / "psi_1_0.bin", std::ios::binary);
  REQUIRE(is.good());
  std::uint64_t count = 0;
  is.read(reinterpret_cast<char*>(&count), 8);
  Eigen::VectorXd from_file = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint64_t node = 0;
    double value = 0.0;
    is.read(reinterpret_cast<char*>(&node), 8);
    is.read(reinterpret_cast<char*>(&value), 8);
    from_file[static_cast<int>(node)] = value;
  }
  const Eigen::VectorXd direct = build_basis(s.mesh, s.spec, s.field, s.weight,
                                             solver.eigenbases(), 1, 0, 1, b);
  CHECK((from_file - direct).lpNorm<Eigen::Infinity>() <
        1e-12 * (1.0 + direct.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("basis energy decays with the oversampling radius") {
  Setup s = make_setup(160, 20, Geometry::MixedDNC, 1e3, 23);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  const auto bases = build_all_eigenbases(s.mesh, s.field, s.weight, s.spec, b, 1);
  const int elem = s.mesh.coarse_id(10, 10);

  double previous = std::numeric_limits<double>::infinity();
  for (int m = 2; m <= 4; ++m) {
    const Eigen::VectorXd psi =
        build_basis(s.mesh, s.spec, s.field, s.weight, bases, elem, 0, m, b);
    const OversampleDomain inner = oversample(s.mesh, s.spec, elem, m - 1);
    std::vector<int> outside;
    for (int c = 0; c < s.mesh.n_cells(); ++c) {
      auto [ci, cj] = s.mesh.cell_ij(c);
      const bool in_inner = ci >= inner.i_lo && ci < inner.i_hi && cj >= inner.j_lo &&
                            cj < inner.j_hi;
      if (!in_inner) outside.push_back(c);
    }
    const SparseMat a_out = assemble_stiffness(s.mesh, s.field, outside);
    const double tail = psi.dot(a_out * psi);
    CHECK(tail < previous);
    previous = tail;
  }
}

TEST_SUITE_END();
