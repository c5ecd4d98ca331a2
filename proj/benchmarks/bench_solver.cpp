#include <benchmark/benchmark.h>

#include "cem/contact.hpp"
#include "cem/multiscale.hpp"
#include "cem/sources.hpp"

using namespace cem;

namespace {

struct Desk {
  StructuredMesh mesh;
  BoundarySpec spec;
  PermField field;
  SpectralWeight weight;

  Desk() {
    std::tie(mesh, spec) = build_mesh(160, 20, Geometry::MixedDNC);
    field = synth_medium(MediumKind::Inclusions, 1, 1e3, mesh);
    weight = spectral_weight(field, mesh);
  }
};

const Desk& desk() {
  static Desk d;
  return d;
}

}  // namespace

static void BM_AssembleStiffness(benchmark::State& state) {
  const Desk& d = desk();
  for (auto _ : state) {
    SparseMat a = assemble_stiffness(d.mesh, d.field);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_AssembleStiffness);

static void BM_LocalSpectral(benchmark::State& state) {
  const Desk& d = desk();
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(d.mesh.n_nodes());
  const int elem = d.mesh.coarse_id(10, 10);
  for (auto _ : state) {
    LocalEigenBasis eb =
        solve_local_spectral(d.mesh, d.field, d.weight, d.spec, elem, b, 3);
    benchmark::DoNotOptimize(eb);
  }
}
BENCHMARK(BM_LocalSpectral);

static void BM_BuildBasis(benchmark::State& state) {
  const Desk& d = desk();
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(d.mesh.n_nodes());
  static const auto bases =
      build_all_eigenbases(d.mesh, d.field, d.weight, d.spec, b, 3);
  const int m = static_cast<int>(state.range(0));
  const int elem = d.mesh.coarse_id(10, 10);
  for (auto _ : state) {
    Eigen::VectorXd psi =
        build_basis(d.mesh, d.spec, d.field, d.weight, bases, elem, 0, m, b);
    benchmark::DoNotOptimize(psi);
  }
}
BENCHMARK(BM_BuildBasis)->Arg(2)->Arg(3)->Arg(4);

static void BM_FineNewtonStep(benchmark::State& state) {
  const Desk& d = desk();
  static const FineForms forms = assemble_fine_forms(
      d.mesh, d.spec, d.field, assemble_source_load(d.mesh, 1), nullptr);
  const Eigen::VectorXd bvals = Eigen::VectorXd::Zero(d.mesh.n_nodes());
  for (auto _ : state) {
    SparseMat sys = forms.stiffness_bc + assemble_contact_trace(d.mesh, d.spec, bvals);
    auto [x, rep] = solve_spd(sys, forms.load);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_FineNewtonStep);

BENCHMARK_MAIN();
