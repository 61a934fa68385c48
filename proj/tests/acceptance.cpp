// One PASS/FAIL line per primary acceptance criterion. Exit status is the
// number of failing criteria.

#include "tinysocp/benchmarks.hpp"
#include "tinysocp/codegen.hpp"
#include "tinysocp/oracle.hpp"
#include "tinysocp/projections.hpp"
#include "tinysocp/riccati.hpp"
#include "tinysocp/solver.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <new>
#include <random>
#include <string>
#include <vector>

#include "codegen_harness.hpp"
#include "test_util.hpp"

namespace {

std::atomic<long> g_allocations{0};

}  // namespace

void* operator new(std::size_t size) {
  g_allocations.fetch_add(1, std::memory_order_relaxed);
  if (void* p = std::malloc(size == 0 ? 1 : size)) return p;
  throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

namespace {

using namespace tinysocp;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& text) {
    if (pass) detail += (detail.empty() ? "" : ", ") + text;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix as_matrix(const std::vector<double>& buf, int rows, int cols) {
  return Matrix::Map(buf.data(), rows, cols);
}

void fill(std::vector<double>& buf, const Matrix& M) {
  std::copy(M.data(), M.data() + M.size(), buf.begin());
}

// ---- 1 -----------------------------------------------------------------------

Outcome soc_projection() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto point = [&] {
    Vector z(3);
    for (int i = 0; i < 3; ++i) z[i] = 2.0 * normal(rng);
    return z;
  };
  const auto project = [](Vector z) {
    project_soc<double>(std::span<double>(z.data(), 3));
    return z;
  };
  double worst_gap = -1.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector z = point();
    const double gap = (z - project(z)).norm() - (z - oracle::grid_projection_oracle(z, 400)).norm();
    worst_gap = std::max(worst_gap, gap);
  }
  out.require(worst_gap <= 1e-6, "projection farther than a grid point by " + fmt(worst_gap));

  double idem = 0.0, expand = -1.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector a = point(), b = point();
    const Vector pa = project(a);
    idem = std::max(idem, (project(pa) - pa).cwiseAbs().maxCoeff());
    expand = std::max(expand, (pa - project(b)).norm() - (a - b).norm());
  }
  out.require(idem <= 1e-12, "idempotence error " + fmt(idem));
  out.require(expand <= 1e-12, "expansion " + fmt(expand));
  const double t = seconds_since(start);
  out.require(t < 10.0, "runtime " + fmt(t) + " s");
  out.note("worst grid gap " + fmt(worst_gap) + ", " + fmt(t) + " s");
  return out;
}

// ---- 2 -----------------------------------------------------------------------

Outcome dare_fixed_point() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(1002);
  int accepted = 0, rejected = 0;
  double worst = 0.0;
  while (accepted < 50 && rejected < 500) {
    const int n = 1 + accepted % 8, m = 1 + accepted % 4;
    const ProblemDefinition p = testing::random_problem(rng, n, m, 5, false);
    const AugmentedCosts aug = augment_costs(p.cost, p.settings.rho);
    try {
      const InfiniteHorizonLqr lqr = compute_infinite_horizon(p.dynamics, aug.Q, aug.R);
      worst = std::max(worst, dare_residual(p.dynamics, aug.Q, aug.R, lqr.K, lqr.P));
      ++accepted;
    } catch (const NoConvergence&) {
      ++rejected;
    }
  }
  out.require(accepted == 50, "only " + std::to_string(accepted) + " systems accepted");
  out.require(worst < 1e-8, "DARE residual " + fmt(worst));

  const LinearDynamics scalar{Matrix::Ones(1, 1), Matrix::Ones(1, 1), Vector::Zero(1)};
  const InfiniteHorizonLqr golden =
      compute_infinite_horizon(scalar, Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  out.require(std::abs(golden.P(0, 0) - phi) <= 1e-9,
              "scalar Pinf " + fmt(golden.P(0, 0)));
  const double t = seconds_since(start);
  out.require(t < 10.0, "runtime " + fmt(t) + " s");
  out.note("max residual " + fmt(worst) + " over 50 systems, golden ratio error " +
           fmt(std::abs(golden.P(0, 0) - phi)));
  return out;
}

// ---- 3 -----------------------------------------------------------------------

Outcome cached_backward_pass() {
  Outcome out;
  std::mt19937_64 rng(1003);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6, m = 1 + trial % 3, N = 5 + trial;
    const ValidatedProblem v = validate(testing::random_problem(rng, n, m, N, true));
    const SolverCache cache = make_cache(v);
    Solver<double> solver(v, cache);
    Workspace<double>& ws = solver.workspace();
    const Matrix q = testing::random_matrix(rng, n, N);
    const Matrix r = testing::random_matrix(rng, m, N - 1);
    fill(ws.q_tilde, q);
    fill(ws.r_tilde, r);
    backward_pass(ws, solver.data());

    const Matrix& A = v.dynamics().A;
    const Matrix& B = v.dynamics().B;
    const Vector& c = v.dynamics().c;
    const Matrix& P = cache.Pinf;
    const Matrix& K = cache.Kinf;
    const Matrix R_aug = augment_costs(v.cost(), cache.rho).R;
    const auto H = (R_aug + B.transpose() * P * B).ldlt();
    Matrix p(n, N), d(m, N - 1);
    p.col(N - 1) = q.col(N - 1);
    for (int k = N - 2; k >= 0; --k) {
      d.col(k) = H.solve(B.transpose() * p.col(k + 1) + r.col(k) + B.transpose() * P * c);
      p.col(k) = q.col(k) + (A - B * K).transpose() * (p.col(k + 1) - P * B * d.col(k) + P * c) +
                 K.transpose() * (R_aug * d.col(k) - r.col(k));
    }
    const double scale = std::max(1.0, testing::max_abs(p));
    worst = std::max(worst, testing::max_abs(as_matrix(ws.p, n, N) - p) / scale);
    worst = std::max(worst, testing::max_abs(as_matrix(ws.d, m, N - 1) - d) / scale);
  }
  out.require(worst <= 1e-10, "max scaled error " + fmt(worst));
  out.note("max scaled error " + fmt(worst) + " on 20 problems");
  return out;
}

// ---- 4 -----------------------------------------------------------------------

Outcome primal_update() {
  Outcome out;
  std::mt19937_64 rng(1004);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6, m = 1 + trial % 3, N = 2 + (trial * 28) / 19;
    const ValidatedProblem v = validate(testing::random_problem(rng, n, m, N, true));
    const SolverCache cache = make_cache(v);
    Solver<double> solver(v, cache);
    Workspace<double>& ws = solver.workspace();
    const Matrix q = testing::random_matrix(rng, n, N);
    const Matrix r = testing::random_matrix(rng, m, N - 1);
    const Vector x0 = testing::random_matrix(rng, n, 1);
    fill(ws.q_tilde, q);
    fill(ws.r_tilde, r);
    fill(ws.x0, x0);
    backward_pass(ws, solver.data());
    forward_pass(ws, solver.data());
    const AugmentedCosts aug = augment_costs(v.cost(), cache.rho);
    const oracle::Trajectory ref =
        oracle::kkt_solve({&v.dynamics(), aug.Q, aug.R, cache.Pinf, q, r, x0});
    const double scale = std::max(1.0, testing::max_abs(ref.x));
    worst = std::max(worst, testing::max_abs(as_matrix(ws.x, n, N) - ref.x) / scale);
    worst = std::max(worst, testing::max_abs(as_matrix(ws.u, m, N - 1) - ref.u) / scale);
  }
  out.require(worst <= 1e-8, "max scaled error " + fmt(worst));
  out.note("max scaled error " + fmt(worst) + " on 20 problems, N up to 30");
  return out;
}

// ---- 5 -----------------------------------------------------------------------

Outcome constrained_convergence() {
  Outcome out;
  const auto start = Clock::now();
  ProblemDefinition p = testing::double_integrator(30, 0.1);
  p.constraints.input_bounds = Bounds{Vector::Constant(1, -0.5), Vector::Constant(1, 0.5)};
  p.settings.rho = 1.0;
  p.settings.max_iter = 20000;
  const std::vector<double> x0{2.0, 0.0};
  const LinearCost zero{Matrix::Zero(2, 30), Matrix::Zero(1, 29)};

  ValidatedProblem base = validate(p);
  const SolverCache cache = make_cache(base);
  oracle::ReferenceOptions ref_options;
  ref_options.max_iter = 100000;
  const oracle::ReferenceResult ref =
      oracle::reference_admm(base, cache, zero, Vector::Map(x0.data(), 2), ref_options);

  for (double tol : {1e-3, 1e-2}) {
    Settings s = p.settings;
    s.abs_pri_tol = tol;
    s.abs_dua_tol = tol;
    Solver<double> solver(base.with_settings(s), cache);
    solver.set_x0(x0);
    const SolveReport<double>& report = solver.solve();
    const std::string tag = "tol " + fmt(tol) + ": ";
    out.require(report.status == TerminationStatus::Solved, tag + "not solved");
    out.require(report.pri_res < tol && report.dua_res < tol,
                tag + "residuals " + fmt(report.pri_res) + "/" + fmt(report.dua_res));
    const double J = oracle::objective(base, cache, zero, as_matrix(report.x_traj, 2, 30),
                                       as_matrix(report.u_traj, 1, 29));
    if (tol == 1e-3) {
      out.require(std::abs(J - ref.objective) <= 1e-4,
                  tag + "objective gap " + fmt(std::abs(J - ref.objective)) + " (" +
                      fmt(std::abs(J - ref.objective) / std::abs(ref.objective)) + " relative)");
      out.note("objective gap " + fmt(std::abs(J - ref.objective)) + " at 1e-3 after " +
               std::to_string(report.iterations) + " iterations");
    } else {
      out.note("solved at 0.01 in " + std::to_string(report.iterations) + " iterations");
    }
  }
  // Context either way: the same solver run to a tight tolerance.
  Settings tight = p.settings;
  tight.abs_pri_tol = 1e-7;
  tight.abs_dua_tol = 1e-7;
  Solver<double> solver(base.with_settings(tight), cache);
  solver.set_x0(x0);
  const SolveReport<double>& report = solver.solve();
  const double J = oracle::objective(base, cache, zero, as_matrix(report.x_traj, 2, 30),
                                     as_matrix(report.u_traj, 1, 29));
  out.detail += "; at tol 1e-7 the gap is " + fmt(std::abs(J - ref.objective));
  const double t = seconds_since(start);
  out.require(t < 30.0, "runtime " + fmt(t) + " s");
  return out;
}

// ---- 6-8 ---------------------------------------------------------------------

Outcome safety_filter() {
  Outcome out;
  const bench::Scenario s = bench::make_safety_filter();
  bench::ClosedLoopOptions options;
  options.steps = s.default_steps;
  options.budget = 1000;
  const auto max_position = [](const bench::ClosedLoopResult& r) {
    double worst = std::abs(r.final_state[0]);
    for (const auto& step : r.trajectory) worst = std::max(worst, std::abs(step.x[0]));
    return worst;
  };
  const double filtered = max_position(bench::run_closed_loop(s, options));
  options.bypass_solver = true;
  const double raw = max_position(bench::run_closed_loop(s, options));
  const double limit = 0.6 + s.problem.settings.abs_pri_tol;
  out.require(filtered <= limit, "filtered max |p| " + fmt(filtered));
  out.require(raw > 1.0, "unfiltered max |p| only " + fmt(raw));
  char buf[96];
  std::snprintf(buf, sizeof buf, "max |p| %.5f filtered vs %.3f unfiltered, %d steps", filtered,
                raw, options.steps);
  out.note(buf);
  return out;
}

Outcome rocket_landing() {
  Outcome out;
  const bench::Scenario s = bench::make_rocket_landing();
  bench::ClosedLoopOptions options;
  options.steps = s.default_steps;
  const auto run = [&](int budget, bool cold) {
    options.budget = budget;
    options.cold_start = cold;
    return bench::run_closed_loop(s, options).metrics;
  };
  const bench::ClosedLoopMetrics low = run(3, false), mid = run(33, false), high = run(444, false);
  const bench::ClosedLoopMetrics cold = run(33, true);
  out.require(high.max_input_cone_excess <= 1e-2,
              "cone excess at 444: " + fmt(high.max_input_cone_excess));
  out.require(high.landing_error <= low.landing_error,
              "landing error 444 " + fmt(high.landing_error) + " > 3 " + fmt(low.landing_error));
  out.require(mid.landing_error < cold.landing_error,
              "warm 33 " + fmt(mid.landing_error) + " not below cold " + fmt(cold.landing_error));
  out.note("landing error 3/33/444 = " + fmt(low.landing_error) + "/" + fmt(mid.landing_error) +
           "/" + fmt(high.landing_error) + ", cold 33 = " + fmt(cold.landing_error) +
           ", cone excess at 444 " + fmt(high.max_input_cone_excess));
  return out;
}

Outcome spiral_landing() {
  Outcome out;
  bench::Scenario s = bench::make_spiral_landing();
  bench::ClosedLoopOptions options;
  options.steps = s.default_steps;
  options.budget = 1000;
  const auto excess = [](const bench::ClosedLoopResult& r, int& violating) {
    double worst = -1e300;
    violating = 0;
    for (const auto& step : r.trajectory) {
      const double e = std::hypot(step.x[0], step.x[1]) - step.x[2];
      worst = std::max(worst, e);
      violating += e > 1e-2;
    }
    return worst;
  };
  int bad_coned = 0, bad_free = 0;
  const double coned = excess(bench::run_closed_loop(s, options), bad_coned);
  s.problem.settings.en_state_soc = false;
  const double free = excess(bench::run_closed_loop(s, options), bad_free);
  out.require(coned <= 1e-2, "cone excess " + fmt(coned));
  out.require(bad_free >= 1, "unconstrained run never leaves the cone");
  out.note("worst excess " + fmt(coned) + " with cone, " + fmt(free) + " over " +
           std::to_string(bad_free) + " steps without");
  return out;
}

// ---- 9 -----------------------------------------------------------------------

Outcome codegen_differential() {
  Outcome out;
  std::mt19937_64 rng(1009);
  int matched = 0, findings = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 5, m = 1 + trial % 4, N = 4 + trial;
    ProblemDefinition p = testing::random_constrained_problem(rng, n, m, N);
    p.settings.max_iter = 100;
    p.settings.check_termination = 0;
    const ValidatedProblem v = validate(p);
    const SolverCache cache = make_cache(v);
    codegen::GenerateOptions options;
    options.x0 = testing::random_matrix(rng, n, 1);
    options.references =
        References{testing::random_matrix(rng, n, N), testing::random_matrix(rng, m, N - 1)};
    for (codegen::Precision precision : {codegen::Precision::F32, codegen::Precision::F64}) {
      options.precision = precision;
      const std::string tag = "problem " + std::to_string(trial) + " " +
                              std::string(codegen::to_string(precision)) + ": ";
      testing::TempDir dir("accept" + std::to_string(trial));
      codegen::generate(v, cache, dir.path(), options);
      findings += static_cast<int>(codegen::audit_tree(dir.path()).size());
      const auto build = testing::build_generated(dir.path());
      if (build.exit_code != 0 || !build.output.empty()) {
        out.require(false, tag + "build failed");
        continue;
      }
      const auto run = testing::run_generated(dir.path());
      const std::string expected =
          precision == codegen::Precision::F32
              ? testing::library_iterates<float>(v, cache, options)
              : testing::library_iterates<double>(v, cache, options);
      const bool same = run.exit_code == 0 && run.output == expected;
      out.require(same, tag + "iterates differ");
      matched += same;
    }
  }
  out.require(findings == 0, std::to_string(findings) + " audit findings");
  out.note(std::to_string(matched) + "/20 builds bit-identical after 100 iterations, 0 audit findings");
  return out;
}

// ---- 10 ----------------------------------------------------------------------

template <typename T>
long allocations_during_solves(const ValidatedProblem& v, const SolverCache& cache) {
  Solver<T> solver(v, cache);
  std::vector<T> x0(static_cast<std::size_t>(v.dims().n), T(0.5));
  solver.set_x0(x0);
  const long before = g_allocations.load();
  for (int i = 0; i < 5; ++i) {
    solver.solve();
    solver.warm_start_shift();
  }
  return g_allocations.load() - before;
}

Outcome allocation_free() {
  Outcome out;
  std::mt19937_64 rng(1010);
  long total = 0;
  for (int trial = 0; trial < 5; ++trial) {
    ProblemDefinition p = testing::random_constrained_problem(rng, 3 + trial, 3, 8 + trial);
    p.settings.max_iter = 200;
    const ValidatedProblem v = validate(p);
    const SolverCache cache = make_cache(v);
    total += allocations_during_solves<double>(v, cache);
    total += allocations_during_solves<float>(v, cache);
  }
  // Sanity: the counter does see allocations.
  const long before = g_allocations.load();
  std::vector<double>* probe = new std::vector<double>(16);
  delete probe;
  out.require(g_allocations.load() > before, "allocation counter is not live");
  out.require(total == 0, std::to_string(total) + " allocations inside solve");
  out.note("0 allocations over 50 solves, double and float");
  return out;
}

// ---- 11 ----------------------------------------------------------------------

Outcome scaling() {
  Outcome out;
  bench::SweepOptions options;
  options.suite = bench::Suite::Rocket;
  options.sweep = bench::Sweep::Horizon;
  options.values = {8, 16, 32, 64, 128, 256};
  options.iterations = 50;
  options.repeats = 30;
  const std::vector<bench::SweepPoint> points = bench::run_sweep(options);
  std::vector<double> N, t;
  for (const auto& p : points) {
    N.push_back(p.N);
    t.push_back(p.min_iteration_seconds);
  }
  const double exponent = bench::fit_exponent(N, t);
  out.require(exponent <= 1.15, "time exponent " + fmt(exponent));

  const auto bytes = [&](std::size_t i) {
    return static_cast<double>(points[i].footprint.data_bytes + points[i].footprint.workspace_bytes);
  };
  const double slope = (bytes(1) - bytes(0)) / (N[1] - N[0]);
  bool linear = true;
  for (std::size_t i = 2; i < points.size(); ++i) {
    linear = linear && bytes(i) == bytes(0) + slope * (N[i] - N[0]);
  }
  out.require(linear, "footprint not affine in N");
  out.note("time exponent " + fmt(exponent) + ", footprint " + fmt(slope) + " bytes per knot");
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"soc projection vs grid oracle", soc_projection},
      {"dare fixed point", dare_fixed_point},
      {"cached backward pass equals explicit recursion", cached_backward_pass},
      {"primal update equals dense kkt", primal_update},
      {"box-constrained convergence vs reference admm", constrained_convergence},
      {"safety filter keeps the box", safety_filter},
      {"rocket landing budget trend", rocket_landing},
      {"spiral landing cone", spiral_landing},
      {"codegen differential and audit", codegen_differential},
      {"allocation-free solve", allocation_free},
      {"linear scaling in horizon", scaling},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    failures += !outcome.pass;
    std::printf("%s %zu %s: %s\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
