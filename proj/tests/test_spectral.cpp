#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "cem/oracle.hpp"
#include "cem/spectral.hpp"

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

}  // namespace

TEST_SUITE_BEGIN("spectral");

TEST_CASE("zero first eigenvalue with a constant eigenvector off the contact boundary") {
  Setup s = make_setup(16, 4, Geometry::MixedDNC, 1e3);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  // An element away from Gamma_C sees no trace term.
  const int interior = s.mesh.coarse_id(1, 2);
  const LocalEigenBasis eb =
      solve_local_spectral(s.mesh, s.field, s.weight, s.spec, interior, b, 3);
  CHECK(std::abs(eb.eigenvalues[0]) <= 1e-10);
  const Eigen::VectorXd v0 = eb.vectors.col(0);
  const double mean = v0.mean();
  CHECK((v0.array() - mean).abs().maxCoeff() <= 1e-8 * v0.lpNorm<Eigen::Infinity>());
  // Ascending order.
  for (int j = 1; j < eb.count; ++j) CHECK(eb.eigenvalues[j] >= eb.eigenvalues[j - 1]);
  CHECK(eb.eigenvalues.minCoeff() >= -1e-10);
}

TEST_CASE("s-orthonormality at full local dimension") {
  Setup s = make_setup(8, 2, Geometry::AllContact, 10.0);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 50.0;
  const int n_local = (s.mesh.fx + 1) * (s.mesh.fy + 1);
  const LocalEigenBasis eb =
      solve_local_spectral(s.mesh, s.field, s.weight, s.spec, 0, b, n_local);
  const Eigen::MatrixXd gram = eb.vectors.transpose() * eb.weighted_vectors;
  CHECK((gram - Eigen::MatrixXd::Identity(n_local, n_local)).cwiseAbs().maxCoeff() <
        1e-10);
  CHECK_THROWS_AS(
      solve_local_spectral(s.mesh, s.field, s.weight, s.spec, 0, b, n_local + 1),
      std::invalid_argument);
}

TEST_CASE("eigenvalues match a dense two-matrix oracle for constant data") {
  // kappa = 1, weight = c: the spectrum is 1/c times the discrete Neumann
  // eigenvalues of the element, computed here from independently assembled
  // dense forms.
  Setup s = make_setup(12, 3, Geometry::MixedDNC, 1.0);
  const double c = 7.5;
  SpectralWeight wc;
  wc.cell_value = Eigen::VectorXd::Constant(s.mesh.n_cells(), c);
  PermField unit;
  unit.cell_kappa = Eigen::VectorXd::Ones(s.mesh.n_cells());

  const int elem = s.mesh.coarse_id(1, 1);
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  const int l = 6;
  const LocalEigenBasis eb = solve_local_spectral(s.mesh, unit, wc, s.spec, elem, b, l);

  const std::vector<int> cells = s.mesh.coarse_fine_cells(elem);
  const std::vector<int> nodes = s.mesh.coarse_fine_nodes(elem);
  const Eigen::MatrixXd a_full = oracle::naive_stiffness(s.mesh, unit, cells);
  const Eigen::MatrixXd m_full =
      oracle::naive_weighted_mass(s.mesh, Eigen::VectorXd::Ones(s.mesh.n_cells()), cells);
  const int nl = static_cast<int>(nodes.size());
  Eigen::MatrixXd a_loc(nl, nl), m_loc(nl, nl);
  for (int r = 0; r < nl; ++r)
    for (int q = 0; q < nl; ++q) {
      a_loc(r, q) = a_full(nodes[r], nodes[q]);
      m_loc(r, q) = m_full(nodes[r], nodes[q]);
    }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a_loc, m_loc);
  for (int j = 0; j < l; ++j)
    CHECK(eb.eigenvalues[j] ==
          doctest::Approx(es.eigenvalues()[j] / c).epsilon(1e-9).scale(1.0));
}

TEST_CASE("rayleigh quotients are consistent") {
  Setup s = make_setup(16, 4, Geometry::AllContact, 1e3, 5);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e4;
  for (int elem : {0, 3, 5, 15}) {
    const LocalEigenBasis eb =
        solve_local_spectral(s.mesh, s.field, s.weight, s.spec, elem, b, 4);
    Eigen::MatrixXd ac, sm;
    std::vector<int> nodes;
    local_element_forms(s.mesh, s.field, s.weight, s.spec, elem, b, ac, sm, nodes);
    for (int j = 0; j < eb.count; ++j) {
      const Eigen::VectorXd phi = eb.vectors.col(j);
      const double lambda = eb.eigenvalues[j];
      CHECK(std::abs(phi.dot(ac * phi) - lambda * phi.dot(sm * phi)) <=
            1e-8 * (1.0 + std::abs(lambda)));
    }
  }
}

TEST_CASE("eigenvalues are monotone in the contact coefficient") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> bval(0.0, 100.0);
  Setup s = make_setup(8, 2, Geometry::AllContact, 100.0, 2);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd b1 = Eigen::VectorXd::Zero(s.mesh.n_nodes());
    Eigen::VectorXd b2 = b1;
    for (int g : s.spec.contact_nodes) {
      b1[g] = bval(rng);
      b2[g] = b1[g] + bval(rng);
    }
    for (int elem = 0; elem < s.mesh.n_coarse(); ++elem) {
      const LocalEigenBasis lo =
          solve_local_spectral(s.mesh, s.field, s.weight, s.spec, elem, b1, 5);
      const LocalEigenBasis hi =
          solve_local_spectral(s.mesh, s.field, s.weight, s.spec, elem, b2, 5);
      for (int j = 0; j < 5; ++j)
        CHECK(hi.eigenvalues[j] >= lo.eigenvalues[j] - 1e-12 * (1 + hi.eigenvalues[j]));
    }
  }
}

TEST_CASE("first eigenvalue is positive once the trace term is active") {
  Setup s = make_setup(8, 2, Geometry::AllContact, 1.0);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.mesh.n_nodes());
  for (int g : s.spec.contact_nodes) b[g] = 1e4;
  const LocalEigenBasis eb =
      solve_local_spectral(s.mesh, s.field, s.weight, s.spec, 0, b, 2);
  CHECK(eb.eigenvalues[0] > 1e-8);
}

TEST_SUITE_END();
