#include "tinysocp/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace tinysocp::oracle {

Trajectory kkt_solve(const PrimalQp& qp) {
  const LinearDynamics& dyn = *qp.dynamics;
  const Eigen::Index n = dyn.A.rows();
  const Eigen::Index m = dyn.B.cols();
  const Eigen::Index N = qp.q.cols();
  const Eigen::Index nx = n * N;
  const Eigen::Index nv = nx + m * (N - 1);
  const Eigen::Index nc = n * N;

  // Unknowns: [x_0 .. x_{N-1}, u_0 .. u_{N-2}, multipliers].
  Matrix kkt = Matrix::Zero(nv + nc, nv + nc);
  Vector rhs = Vector::Zero(nv + nc);
  for (Eigen::Index k = 0; k < N; ++k) {
    kkt.block(k * n, k * n, n, n) = (k == N - 1) ? qp.Q_terminal : qp.Q;
    rhs.segment(k * n, n) = -qp.q.col(k);
  }
  for (Eigen::Index k = 0; k + 1 < N; ++k) {
    kkt.block(nx + k * m, nx + k * m, m, m) = qp.R;
    rhs.segment(nx + k * m, m) = -qp.r.col(k);
  }

  Matrix G = Matrix::Zero(nc, nv);
  Vector h = Vector::Zero(nc);
  G.block(0, 0, n, n).setIdentity();
  h.head(n) = qp.x0;
  for (Eigen::Index k = 0; k + 1 < N; ++k) {
    const Eigen::Index row = (k + 1) * n;
    G.block(row, (k + 1) * n, n, n).setIdentity();
    G.block(row, k * n, n, n) = -dyn.A;
    G.block(row, nx + k * m, n, m) = -dyn.B;
    h.segment(row, n) = dyn.c;
  }
  kkt.block(nv, 0, nc, nv) = G;
  kkt.block(0, nv, nv, nc) = G.transpose();
  rhs.tail(nc) = h;

  Eigen::FullPivLU<Matrix> lu(kkt);
  if (!lu.isInvertible()) throw SingularKkt("KKT matrix is singular");
  const Vector sol = lu.solve(rhs);

  Trajectory out{Matrix(n, N), Matrix(m, N - 1)};
  for (Eigen::Index k = 0; k < N; ++k) out.x.col(k) = sol.segment(k * n, n);
  for (Eigen::Index k = 0; k + 1 < N; ++k) out.u.col(k) = sol.segment(nx + k * m, m);
  return out;
}

namespace {

// Polar grid over the head, apex chosen as max(|head|, a) which is the exact
// minimizer of (t - a)^2 over t >= |head|.
struct GridSearch {
  double best = std::numeric_limits<double>::infinity();
  Vector arg;

  void consider(const Vector& z, const Vector& y) {
    const double dist = (z - y).squaredNorm();
    if (dist < best) {
      best = dist;
      arg = y;
    }
  }
};

double radius_limit(const Vector& z) { return std::max(z.norm(), 1e-12); }

}  // namespace

Vector grid_projection_oracle(const Vector& z, int resolution) {
  if (z.size() != 2 && z.size() != 3) {
    throw std::invalid_argument("grid oracle supports dimensions 2 and 3");
  }
  const double r_max = radius_limit(z);
  const double a = z[z.size() - 1];
  GridSearch search;
  Vector y(z.size());
  if (z.size() == 2) {
    for (int i = 0; i < resolution; ++i) {
      const double v = -r_max + 2.0 * r_max * i / (resolution - 1);
      y << v, std::max(std::abs(v), a);
      search.consider(z, y);
    }
  } else {
    for (int i = 0; i < resolution; ++i) {
      const double rad = r_max * i / (resolution - 1);
      const double apex = std::max(rad, a);
      for (int j = 0; j < resolution; ++j) {
        const double theta = 2.0 * std::numbers::pi * j / resolution;
        y << rad * std::cos(theta), rad * std::sin(theta), apex;
        search.consider(z, y);
      }
    }
  }
  return search.arg;
}

double grid_spacing(const Vector& z, int resolution) {
  const double r_max = radius_limit(z);
  if (z.size() == 2) return 2.0 * r_max / (resolution - 1);
  const double dr = r_max / (resolution - 1);
  const double arc = r_max * 2.0 * std::numbers::pi / resolution;
  return std::hypot(dr, arc);
}

Vector project_stage(const Vector& v, const std::optional<Bounds>& bounds,
                     const std::vector<ConeSlice>& cones) {
  Vector out = v;
  if (bounds) out = out.cwiseMax(bounds->lower).cwiseMin(bounds->upper);
  for (const ConeSlice& cone : cones) {
    auto slice = out.segment(cone.start, cone.len);
    const double a = slice[cone.len - 1];
    const double norm = slice.head(cone.len - 1).norm();
    if (norm <= -a) {
      slice.setZero();
    } else if (norm > a) {
      const double alpha = 0.5 * (1.0 + a / norm);
      slice.head(cone.len - 1) *= alpha;
      slice[cone.len - 1] = alpha * norm;
    }
  }
  return out;
}

ReferenceResult reference_admm(const ValidatedProblem& problem, const SolverCache& cache,
                               const LinearCost& cost, const Vector& x0,
                               const ReferenceOptions& options) {
  const auto [n, m, N] = problem.dims();
  const LinearDynamics& dyn = problem.dynamics();
  const Matrix& A = dyn.A;
  const Matrix& B = dyn.B;
  const Vector& c = dyn.c;
  const double rho = cache.rho;
  const AugmentedCosts aug = augment_costs(problem.cost(), rho);
  const ConstraintSet& cons = problem.constraints();
  const Settings& settings = problem.settings();

  const std::optional<Bounds> x_bounds =
      settings.en_state_bound ? cons.state_bounds : std::nullopt;
  const std::optional<Bounds> u_bounds =
      settings.en_input_bound ? cons.input_bounds : std::nullopt;
  const std::vector<ConeSlice> x_cones =
      settings.en_state_soc ? cons.state_cones : std::vector<ConeSlice>{};
  const std::vector<ConeSlice> u_cones =
      settings.en_input_soc ? cons.input_cones : std::vector<ConeSlice>{};

  // Time-varying recursion from the terminal Hessian. The stage quantities do
  // not depend on the ADMM iterate, so they are computed once.
  std::vector<Matrix> P(N), K(N - 1);
  std::vector<Eigen::LLT<Matrix>> H(N - 1);
  P[N - 1] = cache.Pinf;
  for (int k = N - 2; k >= 0; --k) {
    H[k].compute(aug.R + B.transpose() * P[k + 1] * B);
    K[k] = H[k].solve(B.transpose() * P[k + 1] * A);
    const Matrix Acl = A - B * K[k];
    P[k] = aug.Q + K[k].transpose() * aug.R * K[k] + Acl.transpose() * P[k + 1] * Acl;
  }

  Matrix x = Matrix::Zero(n, N), z = Matrix::Zero(n, N), lambda = Matrix::Zero(n, N);
  Matrix u = Matrix::Zero(m, N - 1), w = Matrix::Zero(m, N - 1), mu = Matrix::Zero(m, N - 1);
  Matrix p(n, N), d(m, N - 1);

  ReferenceResult result;
  for (int it = 1; it <= options.max_iter; ++it) {
    const Matrix q_mod = cost.q + lambda - rho * z;
    const Matrix r_mod = cost.r + mu - rho * w;

    p.col(N - 1) = q_mod.col(N - 1);
    for (int k = N - 2; k >= 0; --k) {
      const Matrix& Pn = P[k + 1];
      d.col(k) = H[k].solve(B.transpose() * p.col(k + 1) + r_mod.col(k) + B.transpose() * Pn * c);
      const Matrix Acl = A - B * K[k];
      p.col(k) = q_mod.col(k) +
                 Acl.transpose() * (p.col(k + 1) - Pn * B * d.col(k) + Pn * c) +
                 K[k].transpose() * (aug.R * d.col(k) - r_mod.col(k));
    }

    x.col(0) = x0;
    for (int k = 0; k + 1 < N; ++k) {
      u.col(k) = -K[k] * x.col(k) - d.col(k);
      x.col(k + 1) = A * x.col(k) + B * u.col(k) + c;
    }

    const Matrix z_prev = z;
    const Matrix w_prev = w;
    for (int k = 0; k < N; ++k) {
      z.col(k) = project_stage(x.col(k) + lambda.col(k) / rho, x_bounds, x_cones);
    }
    for (int k = 0; k + 1 < N; ++k) {
      w.col(k) = project_stage(u.col(k) + mu.col(k) / rho, u_bounds, u_cones);
    }
    lambda += rho * (x - z);
    mu += rho * (u - w);

    result.iterations = it;
    result.pri_res = std::max((x - z).cwiseAbs().maxCoeff(), (u - w).cwiseAbs().maxCoeff());
    result.dua_res =
        rho * std::max((z - z_prev).cwiseAbs().maxCoeff(), (w - w_prev).cwiseAbs().maxCoeff());
    if (result.pri_res < options.tol && result.dua_res < options.tol) break;
  }

  result.primal = {x, u};
  result.slack = {z, w};
  result.objective = objective(problem, cache, cost, x, u);
  return result;
}

double objective(const ValidatedProblem& problem, const SolverCache& cache,
                 const LinearCost& cost, const Matrix& x, const Matrix& u) {
  const auto [n, m, N] = problem.dims();
  const Matrix& Q = problem.cost().Q;
  const Matrix& R = problem.cost().R;
  const Matrix QN = cache.Pinf - cache.rho * Matrix::Identity(n, n);
  double J = 0.0;
  for (int k = 0; k + 1 < N; ++k) {
    J += 0.5 * x.col(k).dot(Q * x.col(k)) + cost.q.col(k).dot(x.col(k));
    J += 0.5 * u.col(k).dot(R * u.col(k)) + cost.r.col(k).dot(u.col(k));
  }
  J += 0.5 * x.col(N - 1).dot(QN * x.col(N - 1)) + cost.q.col(N - 1).dot(x.col(N - 1));
  (void)m;
  return J;
}

}  // namespace tinysocp::oracle
