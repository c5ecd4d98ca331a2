#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "cem/mesh.hpp"

namespace cem {

/// Piecewise-constant permeability, one value per fine cell.
struct PermField {
  Eigen::VectorXd cell_kappa;
  double kappa_m = 1.0;  // background (matrix) value
  double kappa_I = 1.0;  // inclusion / channel value

  double contrast() const { return kappa_I / kappa_m; }
};

enum class MediumKind { Inclusions, Channels, MixedC };

/// Seeded procedural high-contrast media: scattered rectangular inclusions,
/// long thin channels, or both. Deterministic in (kind, seed, kappa_R, grid).
PermField synth_medium(MediumKind kind, std::uint64_t seed, double kappa_R,
                       const StructuredMesh& mesh);

/// Wrap an externally produced per-cell table (row i = y slab j ascending,
/// column = x). kappa_m / kappa_I become the min / max of the table.
PermField load_field(const Eigen::MatrixXd& table, const StructuredMesh& mesh);

enum class WeightMode { Simplified, LagrangeSum };

/// Per-fine-cell spectral weight for the local mass forms.
struct SpectralWeight {
  Eigen::VectorXd cell_value;
};

/// Simplified: 24*kappa/H^2. LagrangeSum: 3 * sum_j kappa |grad eta_j|^2 with
/// the coarse bilinear Lagrange basis gradients evaluated at the cell center.
SpectralWeight spectral_weight(const PermField& field, const StructuredMesh& mesh,
                               WeightMode mode = WeightMode::Simplified);

}  // namespace cem
