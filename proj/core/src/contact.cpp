#include "cem/contact.hpp"


#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "cem/metrics.hpp"

namespace cem {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

ActiveSet indicator(const Eigen::VectorXd& u, const BoundarySpec& spec) {
  ActiveSet a;
  a.flags.assign(u.size(), 0);
  for (int g : spec.contact_nodes)
    if (u[g] > 0.0) {
      a.flags[g] = 1;
      ++a.count;
    }
  return a;
}

ActiveSet full_active_set(const BoundarySpec& spec, int n_nodes) {
  ActiveSet a;
  a.flags.assign(n_nodes, 0);
  for (int g : spec.contact_nodes) a.flags[g] = 1;
  a.count = static_cast<int>(spec.contact_nodes.size());
  return a;
}

Eigen::VectorXd robin_coefficient(const ActiveSet& active, double eps, int n_nodes) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_nodes);
  for (int g = 0; g < n_nodes; ++g)
    if (active.flags[g]) b[g] = 1.0 / eps;
  return b;
}

FineForms assemble_fine_forms(const StructuredMesh& mesh, const BoundarySpec& spec,
                              const PermField& field, const Eigen::VectorXd& volume_load,
                              const ScalarField2D& p) {
  FineForms f;
  f.stiffness = assemble_stiffness(mesh, field);
  f.trace_unit =
      assemble_contact_trace(mesh, spec, Eigen::VectorXd::Ones(mesh.n_nodes()));
  f.load_raw = volume_load;
  if (p) f.load_raw += assemble_neumann_load(mesh, spec, p);
  f.stiffness_bc = f.stiffness;
  f.load = f.load_raw;
  apply_dirichlet(f.stiffness_bc, f.load, spec);
  f.dirichlet_mask.assign(mesh.n_nodes(), 0);
  for (int g : spec.dirichlet_nodes) f.dirichlet_mask[g] = 1;
  return f;
}

double penalty_energy(const Eigen::VectorXd& u, double eps, const FineForms& forms) {
  if (!(eps > 0.0)) throw std::invalid_argument("penalty_energy: eps must be positive");
  const double quadratic = 0.5 * u.dot(forms.stiffness * u) - forms.load_raw.dot(u);
  double penalty = 0.0;
  for (int k = 0; k < forms.trace_unit.outerSize(); ++k)
    for (SparseMat::InnerIterator it(forms.trace_unit, k); it; ++it) {
      const double up = std::max(0.0, u[it.row()]);
      penalty += 0.5 * it.value() * up * up;
    }
  return quadratic + penalty / eps;
}

double residual_norm(const Eigen::VectorXd& u, double eps, const FineForms& forms) {
  Eigen::VectorXd up = u.cwiseMax(0.0);
  Eigen::VectorXd r =
      forms.stiffness * u + (forms.trace_unit * up) / eps - forms.load_raw;
  double sq = 0.0;
  for (int g = 0; g < r.size(); ++g)
    if (!forms.dirichlet_mask[g]) sq += r[g] * r[g];
  return std::sqrt(sq);
}

Eigen::VectorXd initial_guess(int which, const StructuredMesh& mesh,
                              const BoundarySpec& spec) {
  Eigen::VectorXd u(mesh.n_nodes());
  for (int g = 0; g < mesh.n_nodes(); ++g) {
    const Eigen::Vector2d xy = mesh.node_xy(g);
    switch (which) {
      case 0: u[g] = 0.0; break;
      case 1: u[g] = -xy.x() - xy.y(); break;
      case 2: u[g] = -0.5 * xy.x() * xy.x() - 0.5 * xy.y() * xy.y(); break;
      default: throw std::invalid_argument("initial_guess: expected 0, 1 or 2");
    }
  }
  for (int g : spec.dirichlet_nodes) u[g] = 0.0;
  return u;
}

namespace {

/// Shared outer iteration. The inner solve is a callable mapping an active
/// set to the next iterate. When the boundary is all-contact and the active
/// set is empty the Robin system is singular; if the load pushes the membrane
/// into the obstacle (1^T F > 0) the Newton step diverges along +constants,
/// whose active-set limit is the whole of Gamma_C, so the iteration restarts
/// from the fully active set. Otherwise the penalized functional is unbounded
/// and the solve fails.
template <typename InnerSolve>
SolverRun run_outer_iteration(const StructuredMesh& mesh, const BoundarySpec& spec,
                              const FineForms& forms, const Eigen::VectorXd& u0,
                              const IterationControl& ctl, InnerSolve&& inner) {
  if (!(ctl.eps > 0.0)) throw std::invalid_argument("outer iteration: eps must be positive");
  SolverRun run;
  const bool zero_data = forms.load_raw.isZero(0.0);
  Eigen::VectorXd u = u0;
  ActiveSet active = indicator(u, spec);
  std::vector<ActiveSet> history;

  for (int k = 1; k <= ctl.max_iter; ++k) {
    const auto t0 = Clock::now();
    ActiveSet active_use = active;
    if (!spec.has_dirichlet() && active.count == 0 && !zero_data) {
      if (forms.load_raw.sum() > 0.0) {
        active_use = full_active_set(spec, mesh.n_nodes());
      } else {
        throw NonConvergenceError(
            "outer iteration: singular Robin system (no Dirichlet part, empty active "
            "set, incompatible data)",
            std::move(run));
      }
    }

    Eigen::VectorXd u_next =
        zero_data ? Eigen::VectorXd::Zero(mesh.n_nodes()) : inner(active_use, ctl.eps);

    IterationRow row;
    row.k = k;
    const ActiveSet next_active = indicator(u_next, spec);
    row.active_count = next_active.count;
    row.residual = residual_norm(u_next, ctl.eps, forms);
    row.delta_a = energy_norm(u_next - u, forms.stiffness);
    row.phase_ms = ms_since(t0);
    run.rows.push_back(row);
    if (ctl.keep_iterates) run.iterates.push_back(u_next);

    u = u_next;
    if (next_active == active_use) {
      run.active_set_repeated = true;
      run.u = std::move(u);
      return run;
    }
    if (row.delta_a <= ctl.tol) {
      run.u = std::move(u);
      return run;
    }

    // Borderline nodes can make the active-set map cycle: each state's solve
    // pushes them just across zero for the other state. Revisiting any
    // earlier state proves the cycle; resolve it with one solve on the union
    // of the cycling sets, which pins those nodes to the feasible side.
    const auto seen = std::find(history.begin(), history.end(), next_active);
    if (seen != history.end()) {
      ActiveSet merged = next_active;
      for (auto it = seen; it != history.end(); ++it)
        for (int g = 0; g < mesh.n_nodes(); ++g)
          if (it->flags[g] && !merged.flags[g]) {
            merged.flags[g] = 1;
            ++merged.count;
          }
      Eigen::VectorXd u_final = inner(merged, ctl.eps);
      IterationRow last;
      last.k = k + 1;
      last.active_count = indicator(u_final, spec).count;
      last.residual = residual_norm(u_final, ctl.eps, forms);
      last.delta_a = energy_norm(u_final - u, forms.stiffness);
      run.rows.push_back(last);
      if (ctl.keep_iterates) run.iterates.push_back(u_final);
      run.cycle_detected = true;
      run.active_set_repeated = indicator(u_final, spec) == merged;
      run.u = std::move(u_final);
      return run;
    }
    history.push_back(active_use);
    active = next_active;
  }
  run.u = u;
  throw NonConvergenceError("outer iteration: max_iter exceeded", std::move(run));
}

}  // namespace

SolverRun fine_newton_solve(const StructuredMesh& mesh, const BoundarySpec& spec,
                            const PermField& field, const FineForms& forms,
                            const Eigen::VectorXd& u0, const IterationControl& ctl,
                            const SolveOptions& linear) {
  (void)field;
  auto inner = [&](const ActiveSet& active, double eps) {
    const Eigen::VectorXd b = robin_coefficient(active, eps, mesh.n_nodes());
    SparseMat system = forms.stiffness_bc + assemble_contact_trace(mesh, spec, b);
    auto [x, report] = solve_spd(system, forms.load, linear);
    return x;
  };
  return run_outer_iteration(mesh, spec, forms, u0, ctl, inner);
}

SolverRun iterative_cem_solve(const StructuredMesh& mesh, const BoundarySpec& spec,
                              MultiscaleSolver& solver, const FineForms& forms,
                              const Eigen::VectorXd& u0, const IterationControl& ctl) {
  auto inner = [&](const ActiveSet& active, double eps) {
    const Eigen::VectorXd b = robin_coefficient(active, eps, mesh.n_nodes());
    return solver.solve(b, forms.load_raw);
  };
  return run_outer_iteration(mesh, spec, forms, u0, ctl, inner);
}

SolverRun iterative_cem_solve(const StructuredMesh& mesh, const BoundarySpec& spec,
                              const PermField& field, const SpectralWeight& weight,
                              MsConfig config, const FineForms& forms,
                              const ScalarField2D& p, const Eigen::VectorXd& u0,
                              const IterationControl& ctl) {
  MultiscaleSolver solver(mesh, spec, field, weight, config, p);
  return iterative_cem_solve(mesh, spec, solver, forms, u0, ctl);
}

}  // namespace cem
