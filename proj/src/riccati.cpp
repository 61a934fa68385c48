#include "tinysocp/riccati.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <string>

namespace tinysocp {

namespace {

double max_abs(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

Matrix gain_from(const LinearDynamics& dyn, const Matrix& R, const Matrix& P) {
  const Matrix& B = dyn.B;
  const Matrix H = R + B.transpose() * P * B;
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    throw FactorizationFailure("R + B'PB is not positive definite");
  }
  return llt.solve(B.transpose() * P * dyn.A);
}

Matrix riccati_step(const LinearDynamics& dyn, const Matrix& Q, const Matrix& R,
                    const Matrix& K, const Matrix& P) {
  const Matrix Acl = dyn.A - dyn.B * K;
  Matrix next = Q + K.transpose() * R * K + Acl.transpose() * P * Acl;
  return 0.5 * (next + next.transpose());
}

}  // namespace

AugmentedCosts augment_costs(const CostData& cost, double rho) {
  AugmentedCosts out{cost.Q, cost.R};
  out.Q.diagonal().array() += rho;
  out.R.diagonal().array() += rho;
  return out;
}

InfiniteHorizonLqr compute_infinite_horizon(const LinearDynamics& dyn, const Matrix& Q,
                                            const Matrix& R, const RiccatiOptions& options) {
  const Eigen::Index n = dyn.A.rows();
  const Eigen::Index m = dyn.B.cols();

  Matrix P = Q;
  Matrix K = Matrix::Zero(m, n);
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    Matrix K_next = gain_from(dyn, R, P);
    Matrix P_next = riccati_step(dyn, Q, R, K_next, P);
    if (!P_next.allFinite()) break;
    const double k_change = (K_next - K).cwiseAbs().maxCoeff();
    // K alone can sit still while P diverges (an unstable mode the input
    // cannot reach), so the P identity is required as well.
    const double p_change = (P_next - P).cwiseAbs().maxCoeff();
    const double p_scale = std::max(1.0, P_next.cwiseAbs().maxCoeff());
    K = std::move(K_next);
    P = std::move(P_next);
    if (iter > 1 && k_change < options.tol && p_change < 10.0 * options.tol * p_scale) {
      InfiniteHorizonLqr out;
      out.P = std::move(P);
      out.K = gain_from(dyn, R, out.P);
      out.iterations = iter;
      return out;
    }
  }
  throw NoConvergence("Riccati recursion did not converge in " +
                      std::to_string(options.max_iter) + " iterations");
}

SolverCache build_cache(const LinearDynamics& dyn, const Matrix& Kinf, const Matrix& Pinf,
                        const Matrix& R_aug, double rho) {
  const Matrix& B = dyn.B;
  const Matrix H = R_aug + B.transpose() * Pinf * B;
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    throw FactorizationFailure("R~ + B'PinfB is not positive definite");
  }

  SolverCache cache;
  cache.rho = rho;
  cache.Kinf = Kinf;
  cache.Pinf = Pinf;
  const Matrix inv = llt.solve(Matrix::Identity(H.rows(), H.cols()));
  cache.C1 = 0.5 * (inv + inv.transpose());
  cache.C2 = (dyn.A - B * Kinf).transpose();
  cache.C3 = B.transpose() * Pinf * dyn.c;
  cache.C4 = cache.C2 * Pinf * dyn.c;
  return cache;
}

SolverCache make_cache(const ValidatedProblem& problem, const RiccatiOptions& options) {
  const double rho = problem.settings().rho;
  const AugmentedCosts aug = augment_costs(problem.cost(), rho);
  const InfiniteHorizonLqr lqr =
      compute_infinite_horizon(problem.dynamics(), aug.Q, aug.R, options);
  return build_cache(problem.dynamics(), lqr.K, lqr.P, aug.R, rho);
}

double dare_residual(const LinearDynamics& dyn, const Matrix& Q, const Matrix& R,
                     const Matrix& K, const Matrix& P) {
  return max_abs(P - riccati_step(dyn, Q, R, K, P));
}

double gain_residual(const LinearDynamics& dyn, const Matrix& R, const Matrix& K,
                     const Matrix& P) {
  return max_abs(K - gain_from(dyn, R, P));
}

}  // namespace tinysocp
