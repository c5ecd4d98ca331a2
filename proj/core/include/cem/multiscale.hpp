#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cem/fem.hpp"
#include "cem/field.hpp"
#include "cem/linsolve.hpp"
#include "cem/mesh.hpp"
#include "cem/spectral.hpp"

namespace cem {

struct MsConfig {
  int oversample_layers = 3;       // m
  int eigenvectors_per_element = 3;  // l_m
};

/// Coefficients of the auxiliary projection, per coarse element. The discrete
/// auxiliary space is broken (element pieces are independent L^2 objects), so
/// identities like idempotence live at the coefficient level; the assembled
/// fine vector sums overlapping element pieces at shared nodes.
struct AuxCoefficients {
  std::vector<Eigen::VectorXd> per_element;
};

std::vector<LocalEigenBasis> build_all_eigenbases(const StructuredMesh& mesh,
                                                  const PermField& field,
                                                  const SpectralWeight& weight,
                                                  const BoundarySpec& spec,
                                                  const Eigen::VectorXd& b_node, int l);

AuxCoefficients aux_project(const std::vector<LocalEigenBasis>& bases,
                            const Eigen::VectorXd& v_fine);
AuxCoefficients aux_project_pieces(const std::vector<LocalEigenBasis>& bases,
                                   const std::vector<Eigen::VectorXd>& pieces);
Eigen::VectorXd aux_assemble(const std::vector<LocalEigenBasis>& bases, int n_nodes,
                             const AuxCoefficients& coeffs);
/// The auxiliary projection of a fine vector, assembled back to the fine grid.
Eigen::VectorXd project_aux(const std::vector<LocalEigenBasis>& bases, int n_nodes,
                            const Eigen::VectorXd& v_fine);

/// One multiscale basis function: the constrained energy minimizer on the
/// oversampled domain of element i targeting eigenfunction j, returned as a
/// global fine vector (zero outside the domain and at its fixed nodes).
Eigen::VectorXd build_basis(const StructuredMesh& mesh, const BoundarySpec& spec,
                            const PermField& field, const SpectralWeight& weight,
                            const std::vector<LocalEigenBasis>& bases, int i, int j, int m,
                            const Eigen::VectorXd& b_node);

/// Neumann boundary corrector of element i on its oversampled domain.
Eigen::VectorXd build_corrector(const StructuredMesh& mesh, const BoundarySpec& spec,
                                const PermField& field, const SpectralWeight& weight,
                                const std::vector<LocalEigenBasis>& bases, int i, int m,
                                const ScalarField2D& p, const Eigen::VectorXd& b_node);

struct MsSolveStats {
  int elements_rebuilt = 0;
  double basis_ms = 0.0;
  double coarse_ms = 0.0;
};

/// One-shot multiscale solver with per-element caching. A solve executes the
/// four stages: correctors, auxiliary eigenbases + basis functions (reusing
/// every element whose local contact data is unchanged), the coarse Galerkin
/// system, and the fine-grid reconstruction.
class MultiscaleSolver {
 public:
  MultiscaleSolver(const StructuredMesh& mesh, const BoundarySpec& spec,
                   const PermField& field, const SpectralWeight& weight, MsConfig config,
                   ScalarField2D p = nullptr);

  /// b_node is the Robin coefficient per fine node (nonzero only on Gamma_C).
  /// fine_load must already contain volume and Neumann contributions.
  Eigen::VectorXd solve(const Eigen::VectorXd& b_node, const Eigen::VectorXd& fine_load);

  /// Elements whose cached data would be rebuilt for this coefficient.
  std::vector<int> refresh_set(const Eigen::VectorXd& b_node) const;

  const MsSolveStats& last_stats() const { return stats_; }
  const std::vector<LocalEigenBasis>& eigenbases() const { return eigenbases_; }
  const MsConfig& config() const { return config_; }
  int basis_dim() const;

  /// Writes one little-endian binary file psi_<i>_<j>.bin per basis function:
  /// uint64 entry count, then (uint64 fine-node index, float64 value) pairs
  /// over the support. Requires at least one prior solve.
  void dump_basis(const std::filesystem::path& dir) const;

 private:
  struct ElementData {
    bool valid = false;
    OversampleDomain dom;
    std::vector<int> free_global;          // global ids of free local nodes
    Eigen::VectorXd psi_fingerprint;       // b on domain's contact nodes
    Eigen::MatrixXd psi;                   // n_free x l
    Eigen::VectorXd corrector;             // n_free, empty when p == 0
  };

  bool eig_needs_rebuild(int i, const Eigen::VectorXd& b_node) const;
  bool psi_needs_rebuild(int i, const Eigen::VectorXd& b_node) const;
  Eigen::VectorXd psi_fingerprint_of(const ElementData& e,
                                     const Eigen::VectorXd& b_node) const;
  void rebuild_element(int i, const Eigen::VectorXd& b_node);

  const StructuredMesh& mesh_;
  const BoundarySpec& spec_;
  const PermField& field_;
  const SpectralWeight& weight_;
  MsConfig config_;
  ScalarField2D p_;

  SparseMat stiffness_;
  std::vector<LocalEigenBasis> eigenbases_;
  std::vector<ElementData> elements_;
  MsSolveStats stats_;
};

}  // namespace cem
