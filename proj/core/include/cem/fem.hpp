#pragma once

#include <functional>
#include <span>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cem/field.hpp"
#include "cem/mesh.hpp"

namespace cem {

using SparseMat = Eigen::SparseMatrix<double>;
using ScalarField2D = std::function<double(double, double)>;

/// Exact reference matrices for the bilinear element on a square cell,
/// counterclockwise node order. The stiffness is scale-invariant in 2D;
/// the mass is for the unit cell (scale by area * weight).
Eigen::Matrix4d reference_cell_stiffness();
Eigen::Matrix4d reference_cell_mass();

SparseMat assemble_stiffness(const StructuredMesh& mesh, const PermField& field);
SparseMat assemble_stiffness(const StructuredMesh& mesh, const PermField& field,
                             std::span<const int> cells);

/// Consistent mass with a per-cell weight, assembled over a cell subset.
SparseMat assemble_weighted_mass(const StructuredMesh& mesh,
                                 const Eigen::VectorXd& cell_weight,
                                 std::span<const int> cells);
SparseMat assemble_weighted_mass(const StructuredMesh& mesh,
                                 const Eigen::VectorXd& cell_weight);
/// Unweighted consistent mass over the whole mesh (discrete L^2 form).
SparseMat assemble_mass(const StructuredMesh& mesh);

/// Lumped trace operator on contact edges: diagonal, entry at node j equal to
/// b_j times half the total length of adjacent edges in the subset.
SparseMat assemble_contact_trace(const StructuredMesh& mesh, const BoundarySpec& spec,
                                 const Eigen::VectorXd& b_node,
                                 std::span<const BoundaryEdge> edges);
SparseMat assemble_contact_trace(const StructuredMesh& mesh, const BoundarySpec& spec,
                                 const Eigen::VectorXd& b_node);

/// Consistent (non-lumped) trace mass on the given edges; test/comparison use.
SparseMat assemble_contact_trace_consistent(const StructuredMesh& mesh,
                                            const Eigen::VectorXd& b_node,
                                            std::span<const BoundaryEdge> edges);

/// Volume load by 2x2 tensor Gauss quadrature per cell.
Eigen::VectorXd assemble_load(const StructuredMesh& mesh, const ScalarField2D& f);
/// Volume load for a piecewise-constant source, exact per cell.
Eigen::VectorXd assemble_load_cellwise(const StructuredMesh& mesh,
                                       const Eigen::VectorXd& f_cell);
/// Neumann edge load by 2-point Gauss on the Gamma_N edges.
Eigen::VectorXd assemble_neumann_load(const StructuredMesh& mesh, const BoundarySpec& spec,
                                      const ScalarField2D& p);

/// Symmetric Dirichlet elimination: zero rows and columns, unit diagonal,
/// zero right-hand side at constrained nodes.
void apply_dirichlet(SparseMat& A, Eigen::VectorXd& rhs, const BoundarySpec& spec);
void apply_dirichlet(SparseMat& A, const BoundarySpec& spec);

}  // namespace cem
