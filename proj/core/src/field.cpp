#include "cem/field.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace cem {

namespace {

void paint_rect(Eigen::VectorXd& kappa, const StructuredMesh& m, int ci0, int cj0, int w,
                int hgt, double value) {
  const int ci1 = std::min(m.nx_fine, ci0 + w);
  const int cj1 = std::min(m.ny_fine, cj0 + hgt);
  for (int j = std::max(0, cj0); j < cj1; ++j)
    for (int i = std::max(0, ci0); i < ci1; ++i) kappa[m.cell_id(i, j)] = value;
}

void paint_inclusions(Eigen::VectorXd& kappa, const StructuredMesh& m, std::mt19937_64& rng,
                      double kappa_I) {
  const int nx = m.nx_fine;
  // Small blobs, each at most ~1% of the domain area (side <= nx/10).
  const int max_side = std::max(1, nx / 12);
  const int min_side = std::max(1, nx / 40);
  std::uniform_int_distribution<int> count_dist(24, 40);
  std::uniform_int_distribution<int> side(min_side, max_side);
  std::uniform_int_distribution<int> pos(0, nx - 1);
  const int count = count_dist(rng);
  for (int b = 0; b < count; ++b) {
    int w = side(rng), hgt = side(rng);
    int ci = pos(rng), cj = pos(rng);
    paint_rect(kappa, m, ci, cj, w, hgt, kappa_I);
  }
}

void paint_channels(Eigen::VectorXd& kappa, const StructuredMesh& m, std::mt19937_64& rng,
                    double kappa_I) {
  const int nx = m.nx_fine;
  const int thick_max = std::max(1, nx / 60);
  std::uniform_int_distribution<int> count_dist(5, 8);
  std::uniform_int_distribution<int> thick(1, thick_max);
  std::uniform_int_distribution<int> pos(0, nx - 1);
  std::uniform_int_distribution<int> len(nx / 2, nx);  // spans at least half the domain
  std::uniform_int_distribution<int> orient(0, 1);
  const int count = count_dist(rng);
  for (int c = 0; c < count; ++c) {
    const int t = thick(rng);
    const int row = pos(rng);
    const int start = pos(rng) / 2;
    const int length = len(rng);
    if (orient(rng) == 0)
      paint_rect(kappa, m, start, row, length, t, kappa_I);
    else
      paint_rect(kappa, m, row, start, t, length, kappa_I);
  }
}

}  // namespace

PermField synth_medium(MediumKind kind, std::uint64_t seed, double kappa_R,
                       const StructuredMesh& mesh) {
  if (kappa_R < 1.0) throw std::invalid_argument("synth_medium: kappa_R must be >= 1");
  PermField f;
  f.kappa_m = 1.0;
  f.kappa_I = kappa_R;
  f.cell_kappa = Eigen::VectorXd::Constant(mesh.n_cells(), f.kappa_m);

  std::mt19937_64 rng(seed);
  if (kind == MediumKind::Inclusions || kind == MediumKind::MixedC)
    paint_inclusions(f.cell_kappa, mesh, rng, f.kappa_I);
  if (kind == MediumKind::Channels || kind == MediumKind::MixedC)
    paint_channels(f.cell_kappa, mesh, rng, f.kappa_I);
  return f;
}

PermField load_field(const Eigen::MatrixXd& table, const StructuredMesh& mesh) {
  if (table.rows() != mesh.ny_fine || table.cols() != mesh.nx_fine)
    throw std::invalid_argument("load_field: table dimensions do not match fine cell counts");
  PermField f;
  f.cell_kappa.resize(mesh.n_cells());
  for (int j = 0; j < mesh.ny_fine; ++j)
    for (int i = 0; i < mesh.nx_fine; ++i) {
      const double v = table(j, i);
      if (!(v > 0.0)) throw std::invalid_argument("load_field: nonpositive permeability");
      f.cell_kappa[mesh.cell_id(i, j)] = v;
    }
  f.kappa_m = f.cell_kappa.minCoeff();
  f.kappa_I = f.cell_kappa.maxCoeff();
  return f;
}

SpectralWeight spectral_weight(const PermField& field, const StructuredMesh& mesh,
                               WeightMode mode) {
  SpectralWeight w;
  w.cell_value.resize(mesh.n_cells());
  const double H = mesh.H;
  if (mode == WeightMode::Simplified) {
    w.cell_value = field.cell_kappa * (24.0 / (H * H));
    return w;
  }
  // 3 * kappa * sum of squared gradients of the four coarse bilinear bases,
  // evaluated at the fine-cell center within its coarse element.
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Eigen::Vector2d xy = mesh.cell_center(c);
    auto [I, J] = mesh.coarse_ij(mesh.coarse_of_cell(c));
    const double xr = (xy.x() - I * H) / H;  // in (0,1)
    const double yr = (xy.y() - J * H) / H;
    const double sum_sq =
        ((1 - xr) * (1 - xr) + xr * xr + (1 - yr) * (1 - yr) + yr * yr) * 2.0 / (H * H);
    w.cell_value[c] = 3.0 * field.cell_kappa[c] * sum_sq;
  }
  return w;
}

}  // namespace cem
