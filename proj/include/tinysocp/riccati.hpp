#pragma once

#include "tinysocp/problem.hpp"

#include <stdexcept>

namespace tinysocp {

/// Offline quantities for one value of rho. Built once; the online solver only
/// multiplies by these.
struct SolverCache {
  double rho = 0.0;
  Matrix Kinf;  // m x n
  Matrix Pinf;  // n x n
  Matrix C1;    // m x m, (R~ + B' Pinf B)^-1
  Matrix C2;    // n x n, (A - B Kinf)'
  Vector C3;    // m, B' Pinf c
  Vector C4;    // n, C2 Pinf c
};

struct AugmentedCosts {
  Matrix Q;
  Matrix R;
};

struct InfiniteHorizonLqr {
  Matrix K;
  Matrix P;
  int iterations = 0;
};

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FactorizationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RiccatiOptions {
  double tol = 1e-12;
  int max_iter = 10000;
};

/// Q + rho I and R + rho I.
AugmentedCosts augment_costs(const CostData& cost, double rho);

/// Iterates the Riccati recursion from P = Q until the max-abs change of K
/// between successive iterates drops below options.tol. The returned gain is
/// recomputed from the returned P, so (K, P) satisfy the stationarity
/// identity to rounding.
///
/// Throws NoConvergence when the budget is exhausted, which is how an
/// unstabilizable pair (A, B) shows up.
InfiniteHorizonLqr compute_infinite_horizon(const LinearDynamics& dyn, const Matrix& Q,
                                            const Matrix& R,
                                            const RiccatiOptions& options = {});

/// C1..C4 from a converged (Kinf, Pinf). The only matrix inverse in the
/// package lives here.
SolverCache build_cache(const LinearDynamics& dyn, const Matrix& Kinf, const Matrix& Pinf,
                        const Matrix& R_aug, double rho);

/// augment_costs -> compute_infinite_horizon -> build_cache, using
/// problem.settings().rho.
SolverCache make_cache(const ValidatedProblem& problem, const RiccatiOptions& options = {});

/// ||P - (Q + K'RK + (A-BK)'P(A-BK))||_inf (max-abs entry).
double dare_residual(const LinearDynamics& dyn, const Matrix& Q, const Matrix& R,
                     const Matrix& K, const Matrix& P);

/// ||K - (R + B'PB)^-1 B'PA||_inf (max-abs entry).
double gain_residual(const LinearDynamics& dyn, const Matrix& R, const Matrix& K,
                     const Matrix& P);

}  // namespace tinysocp
