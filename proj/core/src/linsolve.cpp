#include "cem/linsolve.hpp"

#include <Eigen/IterativeLinearSolvers>

namespace cem {

std::pair<Eigen::VectorXd, SolveReport> solve_spd(const SparseMat& A,
                                                  const Eigen::VectorXd& b,
                                                  const SolveOptions& opts) {
  SolveReport report;
  report.method = opts.method;
  const double bnorm = b.norm();

  if (opts.method == SolveMethod::Direct) {
    Eigen::SimplicialLDLT<SparseMat> ldlt(A);
    if (ldlt.info() != Eigen::Success)
      throw SolveError("solve_spd: LDLT factorization failed", report);
    Eigen::VectorXd x = ldlt.solve(b);
    report.rel_residual = bnorm > 0 ? (A * x - b).norm() / bnorm : 0.0;
    if (!x.allFinite())
      throw SolveError("solve_spd: factorization produced non-finite solution", report);
    return {std::move(x), report};
  }

  Eigen::ConjugateGradient<SparseMat, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(opts.tol);
  cg.setMaxIterations(opts.max_iterations);
  cg.compute(A);
  Eigen::VectorXd x = cg.solve(b);
  report.iterations = static_cast<int>(cg.iterations());
  report.rel_residual = cg.error();
  if (cg.info() != Eigen::Success)
    throw SolveError("solve_spd: CG did not converge within iteration cap", report);
  return {std::move(x), report};
}

SpdFactorization::SpdFactorization(const SparseMat& A)
    : ldlt_(std::make_shared<Eigen::SimplicialLDLT<SparseMat>>()) {
  ldlt_->compute(A);
  if (ldlt_->info() != Eigen::Success)
    throw SolveError("SpdFactorization: factorization failed", {});
}

Eigen::VectorXd SpdFactorization::solve(const Eigen::VectorXd& b) const {
  return ldlt_->solve(b);
}

}  // namespace cem
