#include <doctest.h>

#include <Eigen/SparseCholesky>
#include <random>

#include "cem/fem.hpp"
#include "cem/sources.hpp"

using namespace cem;

namespace {

PermField unit_field(const StructuredMesh& m) {
  PermField f;
  f.cell_kappa = Eigen::VectorXd::Ones(m.n_cells());
  return f;
}

double max_asymmetry(const SparseMat& a) {
  const SparseMat d = SparseMat(a - SparseMat(a.transpose()));
  double worst = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMat::InnerIterator it(d, k); it; ++it)
      worst = std::max(worst, std::abs(it.value()));
  return worst;
}

double max_abs(const SparseMat& a) {
  double worst = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMat::InnerIterator it(a, k); it; ++it)
      worst = std::max(worst, std::abs(it.value()));
  return worst;
}

}  // namespace

TEST_SUITE_BEGIN("fem");

TEST_CASE("single-cell stiffness matches the hand-derived entries") {
  auto [m, spec] = build_mesh(4, 2, Geometry::AllContact);
  const int cell = m.cell_id(1, 1);
  const std::vector<int> one{cell};
  const SparseMat a = assemble_stiffness(m, unit_field(m), one);
  const auto nodes = m.cell_nodes(cell);
  CHECK(a.coeff(nodes[0], nodes[0]) == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK(a.coeff(nodes[0], nodes[1]) == doctest::Approx(-1.0 / 6).epsilon(1e-14));
  CHECK(a.coeff(nodes[0], nodes[2]) == doctest::Approx(-1.0 / 3).epsilon(1e-14));
  CHECK(a.coeff(nodes[0], nodes[3]) == doctest::Approx(-1.0 / 6).epsilon(1e-14));
}

TEST_CASE("single-cell mass matches the hand-derived entries") {
  auto [m, spec] = build_mesh(4, 2, Geometry::AllContact);
  const int cell = m.cell_id(0, 0);
  const std::vector<int> one{cell};
  const double area = m.h * m.h;
  const SparseMat s = assemble_weighted_mass(m, Eigen::VectorXd::Ones(m.n_cells()), one);
  const auto nodes = m.cell_nodes(cell);
  CHECK(s.coeff(nodes[0], nodes[0]) == doctest::Approx(area / 9).epsilon(1e-14));
  CHECK(s.coeff(nodes[0], nodes[1]) == doctest::Approx(area / 18).epsilon(1e-14));
  CHECK(s.coeff(nodes[0], nodes[2]) == doctest::Approx(area / 36).epsilon(1e-14));
  // Nodal share of the cell area.
  for (int a = 0; a < 4; ++a) {
    double row = 0.0;
    for (int b = 0; b < 4; ++b) row += s.coeff(nodes[a], nodes[b]);
    CHECK(row == doctest::Approx(area / 4).epsilon(1e-14));
  }
  const SparseMat empty =
      assemble_weighted_mass(m, Eigen::VectorXd::Ones(m.n_cells()), std::vector<int>{});
  CHECK(empty.nonZeros() == 0);
}

TEST_CASE("stiffness rows sum to zero and scale linearly in kappa") {
  auto [m, spec] = build_mesh(8, 4, Geometry::MixedDNC);
  PermField f = unit_field(m);
  f.cell_kappa[3] = 250.0;
  const SparseMat a = assemble_stiffness(m, f);
  const Eigen::VectorXd row_sums = a * Eigen::VectorXd::Ones(m.n_nodes());
  CHECK(row_sums.lpNorm<Eigen::Infinity>() < 1e-12);

  PermField f10 = f;
  f10.cell_kappa *= 10.0;
  const SparseMat a10 = assemble_stiffness(m, f10);
  CHECK(max_abs(SparseMat(a10 - 10.0 * a)) < 1e-12 * max_abs(a10));
}

TEST_CASE("assembled operators are symmetric") {
  auto [m, spec] = build_mesh(12, 4, Geometry::MixedDNC);
  const PermField f = synth_medium(MediumKind::MixedC, 11, 1e3, m);
  const SpectralWeight w = spectral_weight(f, m);
  const SparseMat a = assemble_stiffness(m, f);
  const SparseMat s = assemble_weighted_mass(m, w.cell_value);
  CHECK(max_asymmetry(a) <= 1e-14 * max_abs(a));
  CHECK(max_asymmetry(s) <= 1e-14 * max_abs(s));
}

TEST_CASE("lumped contact trace") {
  auto [m, spec] = build_mesh(400, 80, Geometry::MixedDNC);
  const double eps = 1e-4;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m.n_nodes());
  for (int g : spec.contact_nodes) b[g] = 1.0 / eps;
  const SparseMat t = assemble_contact_trace(m, spec, b);
  const int inner = m.node_id(200, 0);
  CHECK(t.coeff(inner, inner) == doctest::Approx(25.0).epsilon(1e-12));
  // Endpoint of the contact run gets only half an edge.
  const int corner = m.node_id(0, 0);
  CHECK(t.coeff(corner, corner) == doctest::Approx(12.5).epsilon(1e-12));

  const SparseMat zero =
      assemble_contact_trace(m, spec, Eigen::VectorXd::Zero(m.n_nodes()));
  CHECK(zero.nonZeros() == 0);

  Eigen::VectorXd neg = b;
  neg[spec.contact_nodes[0]] = -1.0;
  CHECK_THROWS_AS(assemble_contact_trace(m, spec, neg), std::invalid_argument);
}

TEST_CASE("lumped masses sum to the contact length") {
  for (auto [geom, len] :
       {std::pair{Geometry::AllContact, 4.0}, std::pair{Geometry::MixedDNC, 1.0}}) {
    auto [m, spec] = build_mesh(16, 4, geom);
    const SparseMat t =
        assemble_contact_trace(m, spec, Eigen::VectorXd::Ones(m.n_nodes()));
    double trace = 0.0;
    for (int g = 0; g < m.n_nodes(); ++g) trace += t.coeff(g, g);
    CHECK(trace == doctest::Approx(len).epsilon(1e-13));
  }
}

TEST_CASE("lumped and consistent traces agree on constants") {
  auto [m, spec] = build_mesh(16, 4, Geometry::AllContact);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m.n_nodes());
  for (int g : spec.contact_nodes) b[g] = 3.25;
  const SparseMat lumped = assemble_contact_trace(m, spec, b);
  const SparseMat consistent =
      assemble_contact_trace_consistent(m, b, spec.contact_edges);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.n_nodes());
  // Same total trace integral; the lumped operator is the row-sum collapse.
  CHECK(ones.dot(lumped * ones) == doctest::Approx(3.25 * 4.0).epsilon(1e-12));
  CHECK(ones.dot(consistent * ones) == doctest::Approx(3.25 * 4.0).epsilon(1e-12));
  CHECK(((lumped - consistent) * ones).lpNorm<Eigen::Infinity>() < 1e-13);
  CHECK(max_asymmetry(consistent) <= 1e-14 * max_abs(consistent));
}

TEST_CASE("load assembly") {
  auto [m, spec] = build_mesh(8, 4, Geometry::MixedDNC);
  CHECK(source_f1(0.25, 0.25) == doctest::Approx(1.25).epsilon(1e-14));

  const Eigen::VectorXd zero = assemble_load(m, [](double, double) { return 0.0; });
  CHECK(zero.isZero(0.0));

  // Piecewise-constant source: each node of a +10 cell receives 10*area/4.
  const Eigen::VectorXd f2_cells = cell_table(m, source_f2);
  const int cell = m.cell_id(4, 4);  // center of the cross
  CHECK(f2_cells[cell] == 10.0);
  Eigen::VectorXd only = Eigen::VectorXd::Zero(m.n_cells());
  only[cell] = f2_cells[cell];
  const Eigen::VectorXd load = assemble_load_cellwise(m, only);
  for (int n : m.cell_nodes(cell))
    CHECK(load[n] == doctest::Approx(10.0 * m.h * m.h / 4).epsilon(1e-14));

  // Total volume integral is preserved.
  const Eigen::VectorXd full = assemble_load_cellwise(m, f2_cells);
  CHECK(full.sum() == doctest::Approx(f2_cells.sum() * m.h * m.h).epsilon(1e-12));
}

TEST_CASE("neumann load on the side edges") {
  auto [m, spec] = build_mesh(8, 4, Geometry::MixedDNC);
  const Eigen::VectorXd load = assemble_neumann_load(m, spec, [](double, double) {
    return 2.0;
  });
  CHECK(load.sum() == doctest::Approx(2.0 * 2.0).epsilon(1e-13));  // both sides, p=2
  const Eigen::VectorXd zero = assemble_neumann_load(m, spec, [](double, double) {
    return 0.0;
  });
  CHECK(zero.isZero(0.0));
}

TEST_CASE("dirichlet elimination") {
  auto [m, spec] = build_mesh(8, 4, Geometry::MixedDNC);
  const PermField f = unit_field(m);
  SparseMat a = assemble_stiffness(m, f);
  Eigen::VectorXd rhs = assemble_load(m, [](double, double) { return 1.0; });
  apply_dirichlet(a, rhs, spec);
  for (int g : spec.dirichlet_nodes) {
    CHECK(rhs[g] == 0.0);
    CHECK(a.coeff(g, g) == 1.0);
  }
  Eigen::SimplicialLDLT<SparseMat> ldlt(a);
  REQUIRE(ldlt.info() == Eigen::Success);
  const Eigen::VectorXd u = ldlt.solve(rhs);
  for (int g : spec.dirichlet_nodes) CHECK(u[g] == 0.0);

  // All-contact geometry has no Dirichlet part; elimination is a no-op.
  auto [m2, spec2] = build_mesh(8, 4, Geometry::AllContact);
  SparseMat a2 = assemble_stiffness(m2, f);
  const SparseMat before = a2;
  apply_dirichlet(a2, spec2);
  CHECK(max_abs(SparseMat(a2 - before)) == 0.0);
}

TEST_CASE("galerkin consistency for affine functions") {
  auto [m, spec] = build_mesh(12, 4, Geometry::AllContact);
  const SparseMat a = assemble_stiffness(m, unit_field(m));
  Eigen::VectorXd u(m.n_nodes()), v(m.n_nodes());
  for (int g = 0; g < m.n_nodes(); ++g) {
    const Eigen::Vector2d xy = m.node_xy(g);
    u[g] = 0.3 + 2.0 * xy.x() - 1.5 * xy.y();
    v[g] = -1.0 + 0.5 * xy.x() + 4.0 * xy.y();
  }
  // integral of grad(u).grad(v) = 2*0.5 + (-1.5)*4 = -5 on the unit square.
  CHECK(u.dot(a * v) == doctest::Approx(-5.0).epsilon(1e-13));
}

TEST_CASE("stiffness plus active trace factorizes after constraints") {
  auto [m, spec] = build_mesh(16, 4, Geometry::AllContact);
  const PermField f = synth_medium(MediumKind::Channels, 9, 1e3, m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m.n_nodes());
  b[spec.contact_nodes[3]] = 1e4;  // a single active node suffices
  SparseMat sys = assemble_stiffness(m, f) + assemble_contact_trace(m, spec, b);
  Eigen::SimplicialLLT<SparseMat> llt(sys);
  CHECK(llt.info() == Eigen::Success);
}

TEST_SUITE_END();
