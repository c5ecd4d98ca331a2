#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Core>

#include "cem/fem.hpp"

namespace cem {

/// sqrt(v^T A v) with A the pure stiffness (no contact trace, no elimination).
double energy_norm(const Eigen::VectorXd& v, const SparseMat& stiffness);
/// sqrt(v^T M v) with M the consistent unweighted mass.
double l2_norm(const Eigen::VectorXd& v, const SparseMat& mass);

struct ErrorPair {
  std::optional<double> l2;      // empty when the denominator vanishes
  std::optional<double> energy;
};

/// E_L = |u_fe - u_cem|_L2 / |u_fe|_L2 and the energy-norm twin.
ErrorPair relative_errors(const Eigen::VectorXd& u_fe, const Eigen::VectorXd& u_cem,
                          const SparseMat& stiffness, const SparseMat& mass);
/// T_L = |u_prev - u_curr|_L2 / |u_prev|_L2 and the energy-norm twin.
ErrorPair iteration_rates(const Eigen::VectorXd& u_prev, const Eigen::VectorXd& u_curr,
                          const SparseMat& stiffness, const SparseMat& mass);

struct RunRecordRow {
  int k = 0;
  std::optional<double> E_L, E_a, T_L, T_a;
  int active = 0;
  double residual = 0.0;
  double phase_ms = 0.0;
};

struct RunRecord {
  std::vector<RunRecordRow> rows;

  /// Header "k,E_L,E_a,T_L,T_a,active,residual,phase_ms"; undefined metric
  /// cells are left empty (T columns for k < 2 in particular). Timing values
  /// are written only when requested, keeping re-runs byte-identical.
  void write_csv(std::ostream& os, bool with_timings = false) const;
};

}  // namespace cem
