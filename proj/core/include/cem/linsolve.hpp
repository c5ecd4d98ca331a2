#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include "cem/fem.hpp"

namespace cem {

enum class SolveMethod { Direct, CG };

struct SolveReport {
  SolveMethod method = SolveMethod::Direct;
  int iterations = 0;
  double rel_residual = 0.0;
  bool reused_factorization = false;
};

struct SolveOptions {
  SolveMethod method = SolveMethod::Direct;
  double tol = 1e-12;
  int max_iterations = 20000;
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, SolveReport report)
      : std::runtime_error(what), report(report) {}
  SolveReport report;
};

/// Solves a symmetric positive (semi)definite sparse system. Direct mode uses
/// a sparse LDL^T factorization and ignores tol; CG is Jacobi-preconditioned.
std::pair<Eigen::VectorXd, SolveReport> solve_spd(const SparseMat& A,
                                                  const Eigen::VectorXd& b,
                                                  const SolveOptions& opts = {});

/// A reusable sparse LDL^T factorization for repeated solves against one
/// operator (multiscale basis construction does many right-hand sides).
class SpdFactorization {
 public:
  explicit SpdFactorization(const SparseMat& A);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

 private:
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMat>> ldlt_;
};

}  // namespace cem
