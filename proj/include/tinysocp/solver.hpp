#pragma once

#include "tinysocp/problem.hpp"
#include "tinysocp/projections.hpp"
#include "tinysocp/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace tinysocp {

enum class TerminationStatus { Unsolved, Solved, MaxIters };

std::string_view to_string(TerminationStatus status);

/// Run-time iteration controls. rho is not here: it is fixed by the cache.
template <typename T>
struct IterationSettings {
  T abs_pri_tol = T(1e-3);
  T abs_dua_tol = T(1e-3);
  int max_iter = 500;
  int check_termination = 10;
};

/// Problem data and cache flattened to row-major arrays in the working
/// precision. Disabled or absent constraints are stored as empty arrays.
template <typename T>
struct SolverData {
  ProblemDims dims;
  T rho{};
  std::vector<T> A, B, c;
  std::vector<T> Q, R, Pinf;
  std::vector<T> Kinf, C1, C2, C3, C4;
  std::vector<T> x_min, x_max, u_min, u_max;
  std::vector<ConeSlice> state_cones, input_cones;

  static SolverData from(const ValidatedProblem& problem, const SolverCache& cache);
};

/// All per-iteration state. Buffers are stage-major: entry i of stage k of a
/// width-w buffer lives at k*w + i. Sized once at construction.
template <typename T>
struct Workspace {
  explicit Workspace(const ProblemDims& dims);

  ProblemDims dims;
  std::vector<T> x, z, z_prev, y, p, q, q_tilde, x_ref;  // n * N
  std::vector<T> u, w, w_prev, g, d, r, r_tilde, u_ref;  // m * (N-1)
  std::vector<T> x0;                                     // n
  std::vector<T> scratch;                                // m
  T pri_res{};
  T dua_res{};
  int iter = 0;
  TerminationStatus status = TerminationStatus::Unsolved;

  std::span<T> state(std::vector<T>& buf, int k) {
    return {buf.data() + static_cast<std::size_t>(k) * dims.n, static_cast<std::size_t>(dims.n)};
  }
  std::span<T> input(std::vector<T>& buf, int k) {
    return {buf.data() + static_cast<std::size_t>(k) * dims.m, static_cast<std::size_t>(dims.m)};
  }

  /// Zeroes iterates, duals and cost terms; keeps references and x0.
  void reset_iterates();
};

template <typename T>
struct SolveReport {
  TerminationStatus status = TerminationStatus::Unsolved;
  int iterations = 0;
  T pri_res{};
  T dua_res{};
  std::vector<T> x_traj;  // n * N, stage-major
  std::vector<T> u_traj;  // m * (N-1), stage-major
};

// ---- iteration steps -------------------------------------------------------

/// q_k = -Q x_ref_k (terminal -Pinf x_ref_N), r_k = -R u_ref_k.
template <typename T>
void refs_to_linear_cost(Workspace<T>& ws, const SolverData<T>& data);

/// q~ = q + rho (y - z), r~ = r + rho (g - w).
template <typename T>
void update_linear_costs(Workspace<T>& ws, T rho);

/// p_N = q~_N; d_k = C1 (B' p_{k+1} + r~_k + C3); p_k = q~_k + C2 p_{k+1} - Kinf' r~_k + C4.
template <typename T>
void backward_pass(Workspace<T>& ws, const SolverData<T>& data);

/// x_1 = x0; u_k = -Kinf x_k - d_k; x_{k+1} = A x_k + B u_k + c.
template <typename T>
void forward_pass(Workspace<T>& ws, const SolverData<T>& data);

/// z = proj(x + y), w = proj(u + g); previous slacks are kept for the dual residual.
template <typename T>
void slack_update(Workspace<T>& ws, const SolverData<T>& data);

/// y += x - z, g += u - w.
template <typename T>
void dual_update(Workspace<T>& ws);

template <typename T>
void compute_residuals(Workspace<T>& ws, T rho);

/// Runs ADMM iterations from whatever the workspace currently holds.
template <typename T>
TerminationStatus solve(Workspace<T>& ws, const SolverData<T>& data,
                        const IterationSettings<T>& settings);

/// Moves every iterate one stage earlier and repeats the last stage.
template <typename T>
void warm_start_shift(Workspace<T>& ws);

// ---- owning facade ---------------------------------------------------------

template <typename T>
class Solver {
 public:
  /// Throws std::invalid_argument if the cache was built for another rho or
  /// other dimensions.
  Solver(const ValidatedProblem& problem, const SolverCache& cache);

  void set_x0(std::span<const T> x0);
  /// One column per knot (n x N).
  void set_x_ref(const Matrix& x_ref);
  /// One column per knot (m x (N-1)).
  void set_u_ref(const Matrix& u_ref);

  /// Allocation-free after construction.
  const SolveReport<T>& solve();

  void warm_start_shift() { tinysocp::warm_start_shift(ws_); }
  void reset() { ws_.reset_iterates(); }

  IterationSettings<T>& settings() { return settings_; }
  const IterationSettings<T>& settings() const { return settings_; }
  const SolverData<T>& data() const { return data_; }
  Workspace<T>& workspace() { return ws_; }
  const Workspace<T>& workspace() const { return ws_; }
  const SolveReport<T>& report() const { return report_; }
  const ProblemDims& dims() const { return data_.dims; }

  /// First input of the current plan.
  std::span<const T> first_input() const {
    return {ws_.u.data(), static_cast<std::size_t>(data_.dims.m)};
  }

 private:
  SolverData<T> data_;
  Workspace<T> ws_;
  IterationSettings<T> settings_;
  SolveReport<T> report_;
};

// ---- implementation --------------------------------------------------------

namespace detail {

template <typename T>
std::vector<T> flatten(const Matrix& M) {
  std::vector<T> out(static_cast<std::size_t>(M.size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      out[static_cast<std::size_t>(i * M.cols() + j)] = static_cast<T>(M(i, j));
    }
  }
  return out;
}

// y = M v, M is rows x cols.
template <typename T>
void matvec(const T* M, const T* v, T* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    T acc = T(0);
    for (int j = 0; j < cols; ++j) acc += M[i * cols + j] * v[j];
    y[i] = acc;
  }
}

}  // namespace detail

template <typename T>
SolverData<T> SolverData<T>::from(const ValidatedProblem& problem, const SolverCache& cache) {
  const ProblemDims& dims = problem.dims();
  if (cache.Kinf.rows() != dims.m || cache.Kinf.cols() != dims.n) {
    throw std::invalid_argument("cache dimensions do not match the problem");
  }
  if (cache.rho != problem.settings().rho) {
    throw std::invalid_argument("cache was built for a different rho");
  }
  SolverData out;
  out.dims = dims;
  out.rho = static_cast<T>(cache.rho);
  out.A = detail::flatten<T>(problem.dynamics().A);
  out.B = detail::flatten<T>(problem.dynamics().B);
  out.c = detail::flatten<T>(problem.dynamics().c);
  out.Q = detail::flatten<T>(problem.cost().Q);
  out.R = detail::flatten<T>(problem.cost().R);
  out.Pinf = detail::flatten<T>(cache.Pinf);
  out.Kinf = detail::flatten<T>(cache.Kinf);
  out.C1 = detail::flatten<T>(cache.C1);
  out.C2 = detail::flatten<T>(cache.C2);
  out.C3 = detail::flatten<T>(cache.C3);
  out.C4 = detail::flatten<T>(cache.C4);

  const Settings& s = problem.settings();
  const ConstraintSet& cons = problem.constraints();
  if (s.en_state_bound && cons.state_bounds) {
    out.x_min = detail::flatten<T>(cons.state_bounds->lower);
    out.x_max = detail::flatten<T>(cons.state_bounds->upper);
  }
  if (s.en_input_bound && cons.input_bounds) {
    out.u_min = detail::flatten<T>(cons.input_bounds->lower);
    out.u_max = detail::flatten<T>(cons.input_bounds->upper);
  }
  if (s.en_state_soc) out.state_cones = cons.state_cones;
  if (s.en_input_soc) out.input_cones = cons.input_cones;
  return out;
}

template <typename T>
Workspace<T>::Workspace(const ProblemDims& size) : dims(size) {
  const auto nN = static_cast<std::size_t>(size.n) * size.N;
  const auto mN = static_cast<std::size_t>(size.m) * (size.N - 1);
  for (auto* buf : {&x, &z, &z_prev, &y, &p, &q, &q_tilde, &x_ref}) buf->assign(nN, T(0));
  for (auto* buf : {&u, &w, &w_prev, &g, &d, &r, &r_tilde, &u_ref}) buf->assign(mN, T(0));
  x0.assign(static_cast<std::size_t>(size.n), T(0));
  scratch.assign(static_cast<std::size_t>(size.m), T(0));
}

template <typename T>
void Workspace<T>::reset_iterates() {
  for (auto* buf : {&x, &z, &z_prev, &y, &p, &q_tilde, &u, &w, &w_prev, &g, &d, &r_tilde}) {
    std::fill(buf->begin(), buf->end(), T(0));
  }
  pri_res = T(0);
  dua_res = T(0);
  iter = 0;
  status = TerminationStatus::Unsolved;
}

template <typename T>
void refs_to_linear_cost(Workspace<T>& ws, const SolverData<T>& data) {
  const auto [n, m, N] = data.dims;
  for (int k = 0; k < N; ++k) {
    const T* weight = (k == N - 1) ? data.Pinf.data() : data.Q.data();
    const T* ref = ws.x_ref.data() + k * n;
    T* q = ws.q.data() + k * n;
    for (int i = 0; i < n; ++i) {
      T acc = T(0);
      for (int j = 0; j < n; ++j) acc += weight[i * n + j] * ref[j];
      q[i] = -acc;
    }
  }
  for (int k = 0; k < N - 1; ++k) {
    const T* ref = ws.u_ref.data() + k * m;
    T* r = ws.r.data() + k * m;
    for (int i = 0; i < m; ++i) {
      T acc = T(0);
      for (int j = 0; j < m; ++j) acc += data.R[i * m + j] * ref[j];
      r[i] = -acc;
    }
  }
}

template <typename T>
void update_linear_costs(Workspace<T>& ws, T rho) {
  for (std::size_t i = 0; i < ws.q.size(); ++i) {
    ws.q_tilde[i] = ws.q[i] + rho * (ws.y[i] - ws.z[i]);
  }
  for (std::size_t i = 0; i < ws.r.size(); ++i) {
    ws.r_tilde[i] = ws.r[i] + rho * (ws.g[i] - ws.w[i]);
  }
}

template <typename T>
void backward_pass(Workspace<T>& ws, const SolverData<T>& data) {
  const auto [n, m, N] = data.dims;
  const T* B = data.B.data();
  const T* K = data.Kinf.data();
  const T* C2 = data.C2.data();
  T* tmp = ws.scratch.data();

  std::copy_n(ws.q_tilde.data() + (N - 1) * n, n, ws.p.data() + (N - 1) * n);
  for (int k = N - 2; k >= 0; --k) {
    const T* p_next = ws.p.data() + (k + 1) * n;
    const T* r_k = ws.r_tilde.data() + k * m;
    const T* q_k = ws.q_tilde.data() + k * n;
    T* p_k = ws.p.data() + k * n;
    T* d_k = ws.d.data() + k * m;

    for (int i = 0; i < m; ++i) {
      T acc = T(0);
      for (int j = 0; j < n; ++j) acc += B[j * m + i] * p_next[j];
      tmp[i] = acc + r_k[i] + data.C3[i];
    }
    detail::matvec(data.C1.data(), tmp, d_k, m, m);
    for (int i = 0; i < n; ++i) {
      T cl = T(0);
      for (int j = 0; j < n; ++j) cl += C2[i * n + j] * p_next[j];
      T fb = T(0);
      for (int j = 0; j < m; ++j) fb += K[j * n + i] * r_k[j];
      p_k[i] = q_k[i] + cl - fb + data.C4[i];
    }
  }
}

template <typename T>
void forward_pass(Workspace<T>& ws, const SolverData<T>& data) {
  const auto [n, m, N] = data.dims;
  const T* A = data.A.data();
  const T* B = data.B.data();
  const T* K = data.Kinf.data();

  std::copy_n(ws.x0.data(), n, ws.x.data());
  for (int k = 0; k < N - 1; ++k) {
    const T* x_k = ws.x.data() + k * n;
    const T* d_k = ws.d.data() + k * m;
    T* u_k = ws.u.data() + k * m;
    T* x_next = ws.x.data() + (k + 1) * n;
    for (int i = 0; i < m; ++i) {
      T acc = T(0);
      for (int j = 0; j < n; ++j) acc += K[i * n + j] * x_k[j];
      u_k[i] = -acc - d_k[i];
    }
    for (int i = 0; i < n; ++i) {
      T ax = T(0);
      for (int j = 0; j < n; ++j) ax += A[i * n + j] * x_k[j];
      T bu = T(0);
      for (int j = 0; j < m; ++j) bu += B[i * m + j] * u_k[j];
      x_next[i] = ax + bu + data.c[i];
    }
  }
}

template <typename T>
void slack_update(Workspace<T>& ws, const SolverData<T>& data) {
  const int N = data.dims.N;
  std::copy(ws.z.begin(), ws.z.end(), ws.z_prev.begin());
  std::copy(ws.w.begin(), ws.w.end(), ws.w_prev.begin());
  for (std::size_t i = 0; i < ws.z.size(); ++i) ws.z[i] = ws.x[i] + ws.y[i];
  for (std::size_t i = 0; i < ws.w.size(); ++i) ws.w[i] = ws.u[i] + ws.g[i];

  const std::span<const T> x_min(data.x_min), x_max(data.x_max);
  const std::span<const T> u_min(data.u_min), u_max(data.u_max);
  const std::span<const ConeSlice> x_cones(data.state_cones), u_cones(data.input_cones);
  if (!x_min.empty() || !x_cones.empty()) {
    for (int k = 0; k < N; ++k) project_slacks<T>(ws.state(ws.z, k), x_min, x_max, x_cones);
  }
  if (!u_min.empty() || !u_cones.empty()) {
    for (int k = 0; k < N - 1; ++k) project_slacks<T>(ws.input(ws.w, k), u_min, u_max, u_cones);
  }
}

template <typename T>
void dual_update(Workspace<T>& ws) {
  for (std::size_t i = 0; i < ws.y.size(); ++i) ws.y[i] = ws.y[i] + (ws.x[i] - ws.z[i]);
  for (std::size_t i = 0; i < ws.g.size(); ++i) ws.g[i] = ws.g[i] + (ws.u[i] - ws.w[i]);
}

template <typename T>
void compute_residuals(Workspace<T>& ws, T rho) {
  T pri = T(0);
  T dua = T(0);
  for (std::size_t i = 0; i < ws.x.size(); ++i) {
    pri = std::max(pri, std::abs(ws.x[i] - ws.z[i]));
    dua = std::max(dua, std::abs(ws.z[i] - ws.z_prev[i]));
  }
  for (std::size_t i = 0; i < ws.u.size(); ++i) {
    pri = std::max(pri, std::abs(ws.u[i] - ws.w[i]));
    dua = std::max(dua, std::abs(ws.w[i] - ws.w_prev[i]));
  }
  ws.pri_res = pri;
  ws.dua_res = rho * dua;
}

template <typename T>
TerminationStatus solve(Workspace<T>& ws, const SolverData<T>& data,
                        const IterationSettings<T>& settings) {
  ws.status = TerminationStatus::Unsolved;
  for (int it = 1; it <= settings.max_iter; ++it) {
    update_linear_costs(ws, data.rho);
    backward_pass(ws, data);
    forward_pass(ws, data);
    slack_update(ws, data);
    dual_update(ws);
    ws.iter = it;

    if (settings.check_termination > 0 && it % settings.check_termination == 0) {
      compute_residuals(ws, data.rho);
      if (ws.pri_res < settings.abs_pri_tol && ws.dua_res < settings.abs_dua_tol) {
        ws.status = TerminationStatus::Solved;
        return ws.status;
      }
    }
  }
  compute_residuals(ws, data.rho);
  ws.status = TerminationStatus::MaxIters;
  return ws.status;
}

template <typename T>
void warm_start_shift(Workspace<T>& ws) {
  const auto shift = [](std::vector<T>& buf, int width) {
    if (buf.size() <= static_cast<std::size_t>(width)) return;
    std::copy(buf.begin() + width, buf.end(), buf.begin());
    std::copy(buf.end() - 2 * width, buf.end() - width, buf.end() - width);
  };
  for (auto* buf : {&ws.x, &ws.z, &ws.y}) shift(*buf, ws.dims.n);
  for (auto* buf : {&ws.u, &ws.w, &ws.g}) shift(*buf, ws.dims.m);
}

template <typename T>
Solver<T>::Solver(const ValidatedProblem& problem, const SolverCache& cache)
    : data_(SolverData<T>::from(problem, cache)), ws_(problem.dims()) {
  const Settings& s = problem.settings();
  settings_.abs_pri_tol = static_cast<T>(s.abs_pri_tol);
  settings_.abs_dua_tol = static_cast<T>(s.abs_dua_tol);
  settings_.max_iter = s.max_iter;
  settings_.check_termination = s.check_termination;
  report_.x_traj.assign(ws_.x.size(), T(0));
  report_.u_traj.assign(ws_.u.size(), T(0));
}

template <typename T>
void Solver<T>::set_x0(std::span<const T> x0) {
  if (x0.size() != ws_.x0.size()) throw std::invalid_argument("x0 has wrong size");
  std::copy(x0.begin(), x0.end(), ws_.x0.begin());
}

template <typename T>
void Solver<T>::set_x_ref(const Matrix& x_ref) {
  const auto [n, m, N] = data_.dims;
  if (x_ref.rows() != n || x_ref.cols() != N) throw std::invalid_argument("x_ref must be n x N");
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < n; ++i) ws_.x_ref[k * n + i] = static_cast<T>(x_ref(i, k));
  }
  refs_to_linear_cost(ws_, data_);
}

template <typename T>
void Solver<T>::set_u_ref(const Matrix& u_ref) {
  const auto [n, m, N] = data_.dims;
  if (u_ref.rows() != m || u_ref.cols() != N - 1) {
    throw std::invalid_argument("u_ref must be m x (N-1)");
  }
  for (int k = 0; k < N - 1; ++k) {
    for (int i = 0; i < m; ++i) ws_.u_ref[k * m + i] = static_cast<T>(u_ref(i, k));
  }
  refs_to_linear_cost(ws_, data_);
}

template <typename T>
const SolveReport<T>& Solver<T>::solve() {
  report_.status = tinysocp::solve(ws_, data_, settings_);
  report_.iterations = ws_.iter;
  report_.pri_res = ws_.pri_res;
  report_.dua_res = ws_.dua_res;
  std::copy(ws_.x.begin(), ws_.x.end(), report_.x_traj.begin());
  std::copy(ws_.u.begin(), ws_.u.end(), report_.u_traj.begin());
  return report_;
}

extern template struct SolverData<float>;
extern template struct SolverData<double>;
extern template struct Workspace<float>;
extern template struct Workspace<double>;
extern template class Solver<float>;
extern template class Solver<double>;

}  // namespace tinysocp
