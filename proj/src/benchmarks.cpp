#include "tinysocp/benchmarks.hpp"

#include "tinysocp/riccati.hpp"
#include "tinysocp/solver.hpp"

#include <Eigen/LU>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tinysocp::bench {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 3-D point mass: position then velocity, thrust acceleration as input.
LinearDynamics point_mass(double dt, double gravity) {
  LinearDynamics dyn;
  dyn.A = Matrix::Identity(6, 6);
  dyn.B = Matrix::Zero(6, 3);
  for (int i = 0; i < 3; ++i) {
    dyn.A(i, 3 + i) = dt;
    dyn.B(i, i) = 0.5 * dt * dt;
    dyn.B(3 + i, i) = dt;
  }
  dyn.c = Vector::Zero(6);
  dyn.c[2] = -0.5 * gravity * dt * dt;
  dyn.c[5] = -gravity * dt;
  return dyn;
}

CostData diagonal_cost(int n_pos, int n_vel, double pw, double vw, int m, double iw) {
  Vector q(n_pos + n_vel);
  q << Vector::Constant(n_pos, pw), Vector::Constant(n_vel, vw);
  return {q.asDiagonal(), iw * Matrix::Identity(m, m)};
}

Vector step_dynamics(const LinearDynamics& dyn, const Vector& x, const Vector& u) {
  return dyn.A * x + dyn.B * u + dyn.c;
}

double cone_excess(const Vector& v, const ConeSlice& cone) {
  const auto seg = v.segment(cone.start, cone.len);
  return std::max(0.0, seg.head(cone.len - 1).norm() - seg[cone.len - 1]);
}

double box_excess(const std::optional<Bounds>& bounds, const Vector& v) {
  if (!bounds) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    total += std::max(0.0, bounds->lower[i] - v[i]) + std::max(0.0, v[i] - bounds->upper[i]);
  }
  return total;
}

}  // namespace

Scenario make_safety_filter(const SafetyFilterConfig& cfg) {
  if (cfg.axes < 1) throw std::invalid_argument("safety filter needs at least one axis");
  const int a = cfg.axes;
  const int n = 2 * a;
  const double dt = cfg.dt;

  Scenario s;
  s.id = "safety-filter";
  s.dt = dt;
  s.default_steps = 500;
  ProblemDefinition& p = s.problem;
  p.dims = {n, a, cfg.N};
  p.dynamics.A = Matrix::Identity(n, n);
  p.dynamics.B = Matrix::Zero(n, a);
  p.dynamics.c = Vector::Zero(n);
  Vector qdiag(n);
  Vector lo(n), hi(n);
  for (int i = 0; i < a; ++i) {
    p.dynamics.A(2 * i, 2 * i + 1) = dt;
    p.dynamics.B(2 * i, i) = 0.5 * dt * dt;
    p.dynamics.B(2 * i + 1, i) = dt;
    qdiag[2 * i] = cfg.position_weight;
    qdiag[2 * i + 1] = cfg.velocity_weight;
    lo[2 * i] = -cfg.position_limit;
    hi[2 * i] = cfg.position_limit;
    lo[2 * i + 1] = -kInf;
    hi[2 * i + 1] = kInf;
  }
  p.cost = {qdiag.asDiagonal(), cfg.input_weight * Matrix::Identity(a, a)};
  p.constraints.state_bounds = Bounds{lo, hi};
  p.constraints.input_bounds =
      Bounds{Vector::Constant(a, -cfg.input_limit), Vector::Constant(a, cfg.input_limit)};
  p.settings.rho = cfg.rho;

  const double w = kTwoPi * cfg.frequency_hz;
  // Axes are phase-shifted so multi-axis instances are not degenerate.
  const auto phase = [a](int i) { return a > 1 ? std::numbers::pi * i / a : 0.0; };
  s.nominal = [cfg, w, phase, a](int step, const Vector& x) {
    const double t = step * cfg.dt;
    Vector u(a);
    for (int i = 0; i < a; ++i) {
      const double arg = w * t + phase(i);
      const double pd = cfg.amplitude * std::sin(arg);
      const double vd = cfg.amplitude * w * std::cos(arg);
      const double ad = -cfg.amplitude * w * w * std::sin(arg);
      const double cmd = ad + cfg.kp * (pd - x[2 * i]) + cfg.kd * (vd - x[2 * i + 1]);
      u[i] = std::clamp(cmd, -cfg.input_limit, cfg.input_limit);
    }
    return u;
  };
  s.x_init = Vector::Zero(n);
  for (int i = 0; i < a; ++i) {
    s.x_init[2 * i] = cfg.amplitude * std::sin(phase(i));
    s.x_init[2 * i + 1] = cfg.amplitude * w * std::cos(phase(i));
  }
  // Start inside the safe set.
  for (int i = 0; i < a; ++i) {
    s.x_init[2 * i] = std::clamp(s.x_init[2 * i], -0.5 * cfg.position_limit,
                                 0.5 * cfg.position_limit);
  }
  s.goal = Vector::Zero(n);
  const LinearDynamics dyn = p.dynamics;
  const int N = cfg.N;
  const auto nominal = s.nominal;
  // The terminal stage weighs x_N with Pinf but the slack pulls with rho, so
  // the converged x_N solves (Pinf - rho I) x_N = Pinf x_ref_N. Pre-scaling the
  // last reference makes the nominal rollout itself the fixed point.
  const SolverCache cache = make_cache(validate(p));
  const Matrix terminal =
      cache.Pinf.lu().solve(cache.Pinf - cfg.rho * Matrix::Identity(n, n));
  s.references = [dyn, N, nominal, terminal](int step, const Vector& x) {
    References refs{Matrix(x.size(), N), Matrix(dyn.B.cols(), N - 1)};
    Vector xk = x;
    for (int k = 0; k < N; ++k) {
      refs.x_ref.col(k) = xk;
      if (k + 1 < N) {
        const Vector uk = nominal(step + k, xk);
        refs.u_ref.col(k) = uk;
        xk = step_dynamics(dyn, xk, uk);
      }
    }
    refs.x_ref.col(N - 1) = terminal * refs.x_ref.col(N - 1);
    return refs;
  };
  return s;
}

Scenario make_rocket_landing(const RocketConfig& cfg) {
  if (cfg.x_init.size() != 6) throw std::invalid_argument("rocket state has 6 entries");
  Scenario s;
  s.id = "rocket";
  s.dt = cfg.dt;
  s.default_steps = static_cast<int>(std::lround(1.1 * cfg.descent_time / cfg.dt));
  ProblemDefinition& p = s.problem;
  p.dims = {6, 3, cfg.N};
  p.dynamics = point_mass(cfg.dt, cfg.gravity);
  p.cost = diagonal_cost(3, 3, cfg.position_weight, cfg.velocity_weight, 3, cfg.input_weight);
  p.constraints.input_cones = {{0, 3}};
  Vector lo = Vector::Constant(6, -kInf);
  lo[2] = 0.0;
  p.constraints.state_bounds = Bounds{lo, Vector::Constant(6, kInf)};
  p.settings.rho = cfg.rho;
  p.settings.abs_pri_tol = cfg.tolerance;
  p.settings.abs_dua_tol = cfg.tolerance;

  s.x_init = cfg.x_init;
  s.goal = Vector::Zero(6);
  const Vector start = cfg.x_init.head(3);
  const double T = cfg.descent_time;
  const double dt = cfg.dt;
  const double g = cfg.gravity;
  const int N = cfg.N;
  s.references = [start, T, dt, g, N](int step, const Vector&) {
    References refs{Matrix::Zero(6, N), Matrix::Zero(3, N - 1)};
    for (int k = 0; k < N; ++k) {
      const double t = (step + k) * dt;
      if (t < T) {
        refs.x_ref.col(k).head(3) = (1.0 - t / T) * start;
        refs.x_ref.col(k).tail(3) = -start / T;
      }
    }
    refs.u_ref.row(2).setConstant(g);
    return refs;
  };
  return s;
}

Scenario make_spiral_landing(const SpiralConfig& cfg) {
  Scenario s;
  s.id = "spiral";
  s.dt = cfg.dt;
  ProblemDefinition& p = s.problem;
  p.dims = {6, 3, cfg.N};
  p.dynamics = point_mass(cfg.dt, cfg.gravity);
  p.cost = diagonal_cost(3, 3, cfg.position_weight, cfg.velocity_weight, 3, cfg.input_weight);
  p.constraints.state_cones = {{0, 3}};
  p.constraints.input_bounds =
      Bounds{Vector::Constant(3, -cfg.input_limit), Vector::Constant(3, cfg.input_limit)};
  p.settings.rho = cfg.rho;
  p.settings.abs_pri_tol = cfg.tolerance;
  p.settings.abs_dua_tol = cfg.tolerance;

  const double r = cfg.radius, w = cfg.angular_rate, h0 = cfg.start_altitude;
  const double rate = cfg.descent_rate, dt = cfg.dt, g = cfg.gravity;
  const int N = cfg.N;
  const double touchdown = h0 / rate;
  s.default_steps = static_cast<int>(std::lround((touchdown + 2.0) / dt));
  const auto helix = [r, w, h0, rate, g, touchdown](double t, Vector& x, Vector& u) {
    if (t >= touchdown) {
      x.setZero();
      u << 0.0, 0.0, g;
      return;
    }
    x << r * std::cos(w * t), r * std::sin(w * t), h0 - rate * t, -r * w * std::sin(w * t),
        r * w * std::cos(w * t), -rate;
    u << -r * w * w * std::cos(w * t), -r * w * w * std::sin(w * t), g;
  };
  s.references = [helix, dt, N](int step, const Vector&) {
    References refs{Matrix(6, N), Matrix(3, N - 1)};
    Vector x(6), u(3);
    for (int k = 0; k < N; ++k) {
      helix((step + k) * dt, x, u);
      refs.x_ref.col(k) = x;
      if (k + 1 < N) refs.u_ref.col(k) = u;
    }
    return refs;
  };
  Vector u0(3);
  s.x_init.resize(6);
  helix(0.0, s.x_init, u0);
  s.goal = Vector::Zero(6);
  return s;
}

void perturb_initial_state(Scenario& scenario, unsigned seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, scale);
  for (Eigen::Index i = 0; i < scenario.x_init.size(); ++i) scenario.x_init[i] += noise(rng);
}

double state_violation(const ProblemDefinition& problem, const Vector& x) {
  double total = box_excess(problem.constraints.state_bounds, x);
  for (const ConeSlice& cone : problem.constraints.state_cones) total += cone_excess(x, cone);
  return total;
}

double input_violation(const ProblemDefinition& problem, const Vector& u) {
  return box_excess(problem.constraints.input_bounds, u) + input_cone_excess(problem, u);
}

double input_cone_excess(const ProblemDefinition& problem, const Vector& u) {
  double total = 0.0;
  for (const ConeSlice& cone : problem.constraints.input_cones) total += cone_excess(u, cone);
  return total;
}

ClosedLoopResult run_closed_loop(const Scenario& scenario, const ClosedLoopOptions& options) {
  if (options.bypass_solver && !scenario.nominal) {
    throw std::invalid_argument("scenario '" + scenario.id + "' has no nominal policy");
  }
  const ValidatedProblem problem = validate(scenario.problem);
  const SolverCache cache = make_cache(problem);
  Solver<double> solver(problem, cache);
  solver.settings().max_iter = options.budget;
  const int m = problem.dims().m;

  ClosedLoopResult result;
  result.trajectory.reserve(static_cast<std::size_t>(std::max(options.steps, 0)));
  Vector x = scenario.x_init;
  for (int step = 0; step < options.steps; ++step) {
    ClosedLoopStep rec;
    rec.step = step;
    rec.t = step * scenario.dt;
    rec.x = x;
    if (options.bypass_solver) {
      rec.u = scenario.nominal(step, x);
    } else {
      if (options.cold_start) solver.reset();
      solver.set_x0(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
      const References refs = scenario.references(step, x);
      solver.set_x_ref(refs.x_ref);
      solver.set_u_ref(refs.u_ref);
      const SolveReport<double>& report = solver.solve();
      rec.u = Vector::Map(solver.first_input().data(), m);
      rec.pri_res = report.pri_res;
      rec.dua_res = report.dua_res;
      rec.iterations = report.iterations;
      if (!options.cold_start) solver.warm_start_shift();
    }
    const Vector next = step_dynamics(scenario.problem.dynamics, x, rec.u);
    rec.input_cone_excess = input_cone_excess(scenario.problem, rec.u);
    rec.violation = input_violation(scenario.problem, rec.u) +
                    state_violation(scenario.problem, next);
    result.metrics.total_violation += rec.violation;
    result.metrics.max_input_cone_excess =
        std::max(result.metrics.max_input_cone_excess, rec.input_cone_excess);
    result.metrics.total_iterations += rec.iterations;
    result.trajectory.push_back(std::move(rec));
    x = next;
  }
  result.final_state = x;
  result.metrics.landing_error = (x - scenario.goal).norm();
  return result;
}

std::string trajectory_csv(const ClosedLoopResult& result) {
  std::ostringstream os;
  os << "step,t";
  const auto n = result.final_state.size();
  const auto m = result.trajectory.empty() ? 0 : result.trajectory.front().u.size();
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u" << i;
  os << ",pri_res,dua_res,iters\n";
  char buf[32];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (const ClosedLoopStep& s : result.trajectory) {
    os << s.step << "," << num(s.t);
    for (Eigen::Index i = 0; i < n; ++i) os << "," << num(s.x[i]);
    for (Eigen::Index i = 0; i < m; ++i) os << "," << num(s.u[i]);
    os << "," << num(s.pri_res) << "," << num(s.dua_res) << "," << s.iterations << "\n";
  }
  return os.str();
}

std::string metrics_record(const Scenario& scenario, const ClosedLoopOptions& options,
                           const ClosedLoopResult& result) {
  nlohmann::ordered_json rec;
  rec["problem"] = scenario.id;
  rec["n"] = scenario.problem.dims.n;
  rec["m"] = scenario.problem.dims.m;
  rec["N"] = scenario.problem.dims.N;
  rec["steps"] = options.steps;
  rec["budget"] = options.budget;
  rec["cold_start"] = options.cold_start;
  rec["bypass_solver"] = options.bypass_solver;
  std::vector<int> iterations;
  iterations.reserve(result.trajectory.size());
  for (const auto& s : result.trajectory) iterations.push_back(s.iterations);
  rec["iterations"] = iterations;
  rec["total_violation"] = result.metrics.total_violation;
  rec["max_input_cone_excess"] = result.metrics.max_input_cone_excess;
  rec["landing_error"] = result.metrics.landing_error;
  return rec.dump() + "\n";
}

Suite parse_suite(std::string_view text) {
  if (text == "safety-filter") return Suite::SafetyFilter;
  if (text == "rocket") return Suite::Rocket;
  throw std::invalid_argument("unknown suite '" + std::string(text) + "'");
}

Sweep parse_sweep(std::string_view text) {
  if (text == "state") return Sweep::State;
  if (text == "horizon") return Sweep::Horizon;
  throw std::invalid_argument("unknown sweep '" + std::string(text) + "'");
}

namespace {

Scenario sweep_scenario(Suite suite, Sweep sweep, int value) {
  if (suite == Suite::Rocket) {
    if (sweep == Sweep::State) throw std::invalid_argument("the rocket has fixed dimensions");
    RocketConfig cfg;
    cfg.N = value;
    return make_rocket_landing(cfg);
  }
  SafetyFilterConfig cfg;
  if (sweep == Sweep::State) {
    if (value < 2 || value % 2 != 0) {
      throw std::invalid_argument("safety-filter state dimension must be even and >= 2");
    }
    cfg.axes = value / 2;
    cfg.N = 10;
  } else {
    cfg.axes = 5;
    cfg.N = value;
  }
  return make_safety_filter(cfg);
}

}  // namespace

ProblemDefinition sweep_problem(Suite suite, Sweep sweep, int value) {
  return sweep_scenario(suite, sweep, value).problem;
}

std::vector<SweepPoint> run_sweep(const SweepOptions& options) {
  using Clock = std::chrono::steady_clock;
  std::vector<SweepPoint> points;
  for (int value : options.values) {
    const Scenario scenario = sweep_scenario(options.suite, options.sweep, value);
    const ValidatedProblem problem = validate(scenario.problem);
    Solver<double> solver(problem, make_cache(problem));
    solver.settings().check_termination = 0;
    solver.settings().max_iter = options.iterations;
    const References refs = scenario.references(0, scenario.x_init);
    solver.set_x_ref(refs.x_ref);
    solver.set_u_ref(refs.u_ref);
    const std::span<const double> x0(scenario.x_init.data(),
                                     static_cast<std::size_t>(scenario.x_init.size()));

    SweepPoint point;
    point.n = problem.dims().n;
    point.m = problem.dims().m;
    point.N = problem.dims().N;
    point.iterations = options.iterations;
    point.footprint = codegen::estimate_footprint(problem, codegen::Precision::F32);
    point.min_iteration_seconds = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (int rep = -1; rep < options.repeats; ++rep) {
      solver.reset();
      solver.set_x0(x0);
      const auto start = Clock::now();
      solver.solve();
      const double per_iter =
          std::chrono::duration<double>(Clock::now() - start).count() / options.iterations;
      if (rep < 0) continue;  // warm-up
      total += per_iter;
      point.min_iteration_seconds = std::min(point.min_iteration_seconds, per_iter);
      point.max_iteration_seconds = std::max(point.max_iteration_seconds, per_iter);
    }
    point.mean_iteration_seconds = options.repeats > 0 ? total / options.repeats : 0.0;
    points.push_back(point);
  }
  return points;
}

double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_exponent needs two or more paired samples");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double count = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "n,m,N,iterations,mean_iter_s,min_iter_s,max_iter_s,data_bytes,workspace_bytes\n";
  char buf[32];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return std::string(buf);
  };
  for (const SweepPoint& p : points) {
    os << p.n << "," << p.m << "," << p.N << "," << p.iterations << ","
       << num(p.mean_iteration_seconds) << "," << num(p.min_iteration_seconds) << ","
       << num(p.max_iteration_seconds) << "," << p.footprint.data_bytes << ","
       << p.footprint.workspace_bytes << "\n";
  }
  return os.str();
}

}  // namespace tinysocp::bench
