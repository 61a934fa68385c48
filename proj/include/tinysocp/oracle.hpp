#pragma once

// Slow, independent reference computations used by the tests and the
// `verify` command. Nothing here is on the solver path, and everything here
// may allocate.

#include "tinysocp/problem.hpp"
#include "tinysocp/riccati.hpp"

#include <stdexcept>

namespace tinysocp::oracle {

class SingularKkt : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Trajectory {
  Matrix x;  // n x N
  Matrix u;  // m x (N-1)
};

/// Equality-constrained QP of one primal update, solved by a dense
/// factorization of its KKT system.
struct PrimalQp {
  const LinearDynamics* dynamics = nullptr;
  Matrix Q;         // stage state Hessian
  Matrix R;         // stage input Hessian
  Matrix Q_terminal;
  Matrix q;         // n x N
  Matrix r;         // m x (N-1)
  Vector x0;
};

Trajectory kkt_solve(const PrimalQp& qp);

/// Nearest point of a 2-D or 3-D second-order cone over a polar grid
/// (resolution points per axis); the apex coordinate is minimized exactly
/// for each grid point of the head.
Vector grid_projection_oracle(const Vector& z, int resolution = 400);

/// Worst-case distance between a point and its nearest grid neighbour for
/// grid_projection_oracle.
double grid_spacing(const Vector& z, int resolution = 400);

struct ReferenceOptions {
  int max_iter = 100000;
  double tol = 1e-10;
};

struct ReferenceResult {
  Trajectory primal;
  Trajectory slack;
  double objective = 0.0;
  int iterations = 0;
  double pri_res = 0.0;
  double dua_res = 0.0;
};

/// Plain ADMM with unscaled duals and the full time-varying Riccati
/// recursion (gains and Hessians recomputed per stage from the terminal
/// Hessian, affine terms evaluated in their uncached form).
ReferenceResult reference_admm(const ValidatedProblem& problem, const SolverCache& cache,
                               const LinearCost& cost, const Vector& x0,
                               const ReferenceOptions& options = {});

/// Cost actually minimized by the solver: stage terms plus the terminal
/// quadratic (Pinf - rho I) and terminal linear term q_N.
double objective(const ValidatedProblem& problem, const SolverCache& cache,
                 const LinearCost& cost, const Matrix& x, const Matrix& u);

/// Projection onto the problem's per-stage constraint set, written
/// independently of the solver's kernels.
Vector project_stage(const Vector& v, const std::optional<Bounds>& bounds,
                     const std::vector<ConeSlice>& cones);

}  // namespace tinysocp::oracle
