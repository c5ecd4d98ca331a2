#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cem/field.hpp"
#include "cem/mesh.hpp"
#include "cem/spectral.hpp"

namespace cem {
namespace oracle {

/// Projected-gradient solve of the discrete variational inequality:
/// minimize 1/2 u^T A u - F^T u subject to u <= 0 at the contact nodes.
/// Step 1/lambda_max(A) from a power-iteration estimate; stops when the
/// projected-gradient norm drops below tol. Constraints hold exactly.
/// Test-scale systems only.
Eigen::VectorXd solve_vi_projected(const Eigen::SparseMatrix<double>& A,
                                   const Eigen::VectorXd& F,
                                   std::span<const int> contact_nodes, double tol,
                                   long max_iter);

/// Naive dense assemblies by on-the-fly quadrature of the bilinear shape
/// functions. Deliberately a separate code path from the production assembly
/// so cross-checks are meaningful.
Eigen::MatrixXd naive_stiffness(const StructuredMesh& mesh, const PermField& field);
Eigen::MatrixXd naive_stiffness(const StructuredMesh& mesh, const PermField& field,
                                std::span<const int> cells);
Eigen::MatrixXd naive_weighted_mass(const StructuredMesh& mesh,
                                    const Eigen::VectorXd& cell_weight,
                                    std::span<const int> cells);
Eigen::MatrixXd naive_lumped_trace(const StructuredMesh& mesh,
                                   const Eigen::VectorXd& b_node,
                                   std::span<const BoundaryEdge> edges);

/// Dense reference solve of one local constrained-minimization system on an
/// oversampled domain, assembled naively over the whole fine grid: rows and
/// columns outside the domain's free nodes are constrained to zero and the
/// projection term runs over the contained coarse elements.
Eigen::VectorXd dense_local_basis(const StructuredMesh& mesh, const BoundarySpec& spec,
                                  const PermField& field, const SpectralWeight& weight,
                                  const std::vector<LocalEigenBasis>& bases, int i, int j,
                                  int m, const Eigen::VectorXd& b_node);

}  // namespace oracle
}  // namespace cem
