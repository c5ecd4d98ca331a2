#include "cem/metrics.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cem {

namespace {

double quadratic_norm(const Eigen::VectorXd& v, const SparseMat& form) {
  const double q = v.dot(form * v);
  double max_entry = 0.0;
  for (int k = 0; k < form.outerSize(); ++k)
    for (SparseMat::InnerIterator it(form, k); it; ++it)
      max_entry = std::max(max_entry, std::abs(it.value()));
  const double floor = 1e-12 * (1.0 + max_entry * v.squaredNorm());
  if (q < -floor) throw std::runtime_error("quadratic form is negative beyond tolerance");
  return std::sqrt(std::max(0.0, q));
}

}  // namespace

double energy_norm(const Eigen::VectorXd& v, const SparseMat& stiffness) {
  return quadratic_norm(v, stiffness);
}

double l2_norm(const Eigen::VectorXd& v, const SparseMat& mass) {
  return quadratic_norm(v, mass);
}

ErrorPair relative_errors(const Eigen::VectorXd& u_fe, const Eigen::VectorXd& u_cem,
                          const SparseMat& stiffness, const SparseMat& mass) {
  ErrorPair e;
  const Eigen::VectorXd diff = u_fe - u_cem;
  const double denom_l2 = l2_norm(u_fe, mass);
  const double denom_a = energy_norm(u_fe, stiffness);
  if (denom_l2 > 0.0) e.l2 = l2_norm(diff, mass) / denom_l2;
  if (denom_a > 0.0) e.energy = energy_norm(diff, stiffness) / denom_a;
  return e;
}

ErrorPair iteration_rates(const Eigen::VectorXd& u_prev, const Eigen::VectorXd& u_curr,
                          const SparseMat& stiffness, const SparseMat& mass) {
  return relative_errors(u_prev, u_curr, stiffness, mass);
}

void RunRecord::write_csv(std::ostream& os, bool with_timings) const {
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "k,E_L,E_a,T_L,T_a,active,residual,phase_ms\n";
  auto cell = [&os](const std::optional<double>& v) {
    os << ',';
    if (v) os << *v;
  };
  for (const auto& r : rows) {
    os << r.k;
    cell(r.E_L);
    cell(r.E_a);
    cell(r.T_L);
    cell(r.T_a);
    os << ',' << r.active << ',' << r.residual << ',';
    if (with_timings) os << r.phase_ms;
    os << '\n';
  }
}

}  // namespace cem
