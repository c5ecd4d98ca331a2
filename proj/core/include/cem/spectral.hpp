#pragma once

#include <vector>

#include <Eigen/Core>

#include "cem/field.hpp"
#include "cem/mesh.hpp"

namespace cem {

/// Auxiliary eigenbasis of one coarse element: the l smallest eigenpairs of
/// the local generalized problem (stiffness + contact trace) phi = lambda *
/// (weighted mass) phi over the element's fine nodes, natural boundary
/// conditions everywhere. Eigenvectors are s_i-orthonormal, ascending lambda,
/// sign-fixed so the largest-magnitude entry is positive.
struct LocalEigenBasis {
  int element = -1;
  int count = 0;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;           // n_local x count
  Eigen::MatrixXd weighted_vectors;  // S_i * vectors; the aux constraint columns
  std::vector<int> nodes;            // global node ids, ascending
  Eigen::VectorXd contact_fingerprint;  // b at local nodes on dK_i & Gamma_C
};

LocalEigenBasis solve_local_spectral(const StructuredMesh& mesh, const PermField& field,
                                     const SpectralWeight& weight, const BoundarySpec& spec,
                                     int i, const Eigen::VectorXd& b_node, int l);

/// Dense local forms of one coarse element over its fine nodes (ascending
/// global id order): stiffness+trace and weighted mass. Shared by the
/// eigensolve and exposed for tests.
void local_element_forms(const StructuredMesh& mesh, const PermField& field,
                         const SpectralWeight& weight, const BoundarySpec& spec, int i,
                         const Eigen::VectorXd& b_node, Eigen::MatrixXd& a_plus_c,
                         Eigen::MatrixXd& s, std::vector<int>& nodes);

}  // namespace cem
