#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "cem/fem.hpp"
#include "cem/field.hpp"
#include "cem/linsolve.hpp"
#include "cem/mesh.hpp"
#include "cem/multiscale.hpp"

namespace cem {

/// Discrete active set: the contact nodes where an iterate is strictly
/// positive (ties are inactive).
struct ActiveSet {
  std::vector<std::uint8_t> flags;  // per fine node
  int count = 0;

  bool operator==(const ActiveSet& o) const { return flags == o.flags; }
};

ActiveSet indicator(const Eigen::VectorXd& u, const BoundarySpec& spec);
ActiveSet full_active_set(const BoundarySpec& spec, int n_nodes);

/// Robin coefficient b = (1/eps) on active nodes, 0 elsewhere.
Eigen::VectorXd robin_coefficient(const ActiveSet& active, double eps, int n_nodes);

/// Pre-assembled fine-grid forms shared by the energy, residual and drivers.
struct FineForms {
  SparseMat stiffness;            // pure a(.,.), no boundary modification
  SparseMat stiffness_bc;         // Dirichlet-eliminated copy
  SparseMat trace_unit;           // lumped contact trace with b = 1
  Eigen::VectorXd load;           // volume + Neumann, Dirichlet-zeroed
  Eigen::VectorXd load_raw;       // volume + Neumann, untouched
  std::vector<std::uint8_t> dirichlet_mask;
};

FineForms assemble_fine_forms(const StructuredMesh& mesh, const BoundarySpec& spec,
                              const PermField& field, const Eigen::VectorXd& volume_load,
                              const ScalarField2D& p);

/// F_eps(u) = 1/2 a(u,u) - L(u) + (1/eps) * 1/2 int_{Gamma_C} (u_+)^2, with the
/// lumped trace rule for the penalty term.
double penalty_energy(const Eigen::VectorXd& u, double eps, const FineForms& forms);

/// l2 norm over non-Dirichlet nodes of A u + (1/eps) T u_+ - F.
double residual_norm(const Eigen::VectorXd& u, double eps, const FineForms& forms);

struct IterationRow {
  int k = 0;
  int active_count = 0;
  double residual = 0.0;
  double delta_a = std::numeric_limits<double>::quiet_NaN();  // ||u_k - u_{k-1}||_a
  double phase_ms = 0.0;
};

struct SolverRun {
  Eigen::VectorXd u;
  std::vector<IterationRow> rows;
  std::vector<Eigen::VectorXd> iterates;  // u_1..u_K when requested
  bool active_set_repeated = false;
  bool cycle_detected = false;  // borderline nodes cycled; resolved by a union solve
};

class NonConvergenceError : public SolveError {
 public:
  NonConvergenceError(const std::string& what, SolverRun partial)
      : SolveError(what, {}), partial(std::move(partial)) {}
  SolverRun partial;
};

struct IterationControl {
  double eps = 1e-4;
  double tol = 1e-8;  // absolute, energy norm of the iterate difference
  int max_iter = 25;
  bool keep_iterates = false;
};

/// Semismooth Newton on the fine grid via the equivalent Robin iteration:
/// solve (A + (1/eps) T(active_k)) u_{k+1} = F, activate where u > 0, repeat.
/// Terminates on a repeated active set (exact fixed point) or a small step.
SolverRun fine_newton_solve(const StructuredMesh& mesh, const BoundarySpec& spec,
                            const PermField& field, const FineForms& forms,
                            const Eigen::VectorXd& u0, const IterationControl& ctl,
                            const SolveOptions& linear = {});

/// The same outer iteration with the multiscale solver as the inner solve.
SolverRun iterative_cem_solve(const StructuredMesh& mesh, const BoundarySpec& spec,
                              const PermField& field, const SpectralWeight& weight,
                              MsConfig config, const FineForms& forms,
                              const ScalarField2D& p, const Eigen::VectorXd& u0,
                              const IterationControl& ctl);
/// Variant reusing a caller-owned solver (keeps its basis cache accessible,
/// e.g. for dumping the final basis functions).
SolverRun iterative_cem_solve(const StructuredMesh& mesh, const BoundarySpec& spec,
                              MultiscaleSolver& solver, const FineForms& forms,
                              const Eigen::VectorXd& u0, const IterationControl& ctl);

/// Built-in initial guesses: 0, -x-y, -x^2/2-y^2/2 (nodal, zeroed on Gamma_D).
Eigen::VectorXd initial_guess(int which, const StructuredMesh& mesh,
                              const BoundarySpec& spec);

}  // namespace cem
