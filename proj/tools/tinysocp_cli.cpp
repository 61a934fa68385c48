#include "tinysocp/benchmarks.hpp"
#include "tinysocp/codegen.hpp"
#include "tinysocp/oracle.hpp"
#include "tinysocp/problem_io.hpp"
#include "tinysocp/projections.hpp"
#include "tinysocp/riccati.hpp"
#include "tinysocp/solver.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tinysocp;

namespace {

constexpr int kExitSolved = 0;
constexpr int kExitInputError = 1;
constexpr int kExitMaxIters = 2;

/// Bad command-line content. The message names the flag.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<double> parse_list(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
      throw InputError(flag + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw InputError("--range: expected A..B, got '" + text + "'");
  try {
    const int a = std::stoi(text.substr(0, dots));
    const int b = std::stoi(text.substr(dots + 2));
    if (a < 1 || b < a) throw InputError("--range: need 1 <= A <= B");
    return {a, b};
  } catch (const std::logic_error&) {
    throw InputError("--range: expected integers in A..B, got '" + text + "'");
  }
}

/// A, 2A, 4A, ... up to B, with B itself always included.
std::vector<int> doubling_values(int a, int b) {
  std::vector<int> values;
  for (long v = a; v < b; v *= 2) values.push_back(static_cast<int>(v));
  values.push_back(b);
  return values;
}

ValidatedProblem load_validated(const std::string& path) {
  return validate(load_problem(path));
}

std::string trajectory_table(const SolveReport<double>& report, const ProblemDims& d) {
  std::string out = "k";
  for (int i = 0; i < d.n; ++i) out += ",x" + std::to_string(i);
  for (int i = 0; i < d.m; ++i) out += ",u" + std::to_string(i);
  out += "\n";
  for (int k = 0; k < d.N; ++k) {
    out += std::to_string(k);
    for (int i = 0; i < d.n; ++i) out += "," + num(report.x_traj[static_cast<std::size_t>(k * d.n + i)]);
    for (int i = 0; i < d.m; ++i) {
      out += ",";
      if (k + 1 < d.N) out += num(report.u_traj[static_cast<std::size_t>(k * d.m + i)]);
    }
    out += "\n";
  }
  return out;
}

// ---- solve -------------------------------------------------------------------

struct SolveArgs {
  std::string problem;
  std::string x0;
  std::string xref;
  std::string out;
};

int cmd_solve(const SolveArgs& args) {
  const ValidatedProblem v = load_validated(args.problem);
  const ProblemDims& d = v.dims();
  const std::vector<double> x0 = parse_list("--x0", args.x0);
  if (static_cast<int>(x0.size()) != d.n) {
    throw InputError("--x0: expected " + std::to_string(d.n) + " values, got " +
                     std::to_string(x0.size()));
  }
  Solver<double> solver(v, make_cache(v));
  solver.set_x0(x0);
  if (!args.xref.empty()) solver.set_x_ref(load_knot_table(args.xref, d.N, d.n));
  const SolveReport<double>& report = solver.solve();

  const std::string table = trajectory_table(report, d);
  if (args.out.empty()) {
    std::cout << table;
  } else {
    write_file_atomic(args.out, table);
  }
  std::cout << to_string(report.status) << "," << report.iterations << ","
            << short_num(report.pri_res) << "," << short_num(report.dua_res) << "\n";
  return report.status == TerminationStatus::Solved ? kExitSolved : kExitMaxIters;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::optional<int> steps;
  int budget = 100;
  bool cold_start = false;
  double perturb = 0.0;
  std::string out;
};

bench::Scenario scenario_by_name(const std::string& name) {
  if (name == "safety-filter") return bench::make_safety_filter();
  if (name == "rocket") return bench::make_rocket_landing();
  if (name == "spiral") return bench::make_spiral_landing();
  throw InputError("--scenario: unknown scenario '" + name + "'");
}

fs::path metrics_path(const fs::path& out) {
  return out.parent_path() / (out.stem().string() + ".metrics.json");
}

int cmd_simulate(const SimulateArgs& args, unsigned seed) {
  bench::Scenario scenario = scenario_by_name(args.scenario);
  if (args.perturb > 0.0) bench::perturb_initial_state(scenario, seed, args.perturb);
  bench::ClosedLoopOptions options;
  options.steps = args.steps.value_or(scenario.default_steps);
  options.budget = args.budget;
  options.cold_start = args.cold_start;
  if (options.steps < 0) throw InputError("--steps: must be non-negative");
  if (options.budget < 1) throw InputError("--budget: must be positive");

  const bench::ClosedLoopResult result = bench::run_closed_loop(scenario, options);
  const std::string record = bench::metrics_record(scenario, options, result);
  write_file_atomic(args.out, bench::trajectory_csv(result));
  write_file_atomic(metrics_path(args.out), record);
  std::cout << record;
  return kExitSolved;
}

// ---- bench -------------------------------------------------------------------

struct BenchArgs {
  std::string suite;
  std::string sweep;
  std::string range;
  int iterations = 50;
  int repeats = 20;
  std::string out;
};

int cmd_bench(const BenchArgs& args) {
  bench::SweepOptions options;
  try {
    options.suite = bench::parse_suite(args.suite);
    options.sweep = bench::parse_sweep(args.sweep);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("--suite/--sweep: ") + e.what());
  }
  const auto [a, b] = parse_range(args.range);
  options.values = doubling_values(a, b);
  options.iterations = args.iterations;
  options.repeats = args.repeats;
  const std::vector<bench::SweepPoint> points = bench::run_sweep(options);
  write_file_atomic(args.out, bench::sweep_csv(points));

  std::vector<double> x, t;
  for (const auto& p : points) {
    x.push_back(options.sweep == bench::Sweep::Horizon ? p.N : p.n);
    t.push_back(p.min_iteration_seconds);
  }
  std::cout << "points " << points.size();
  if (points.size() >= 2) std::cout << " exponent " << short_num(bench::fit_exponent(x, t));
  std::cout << "\n";
  return kExitSolved;
}

// ---- codegen -----------------------------------------------------------------

struct CodegenArgs {
  std::string problem;
  std::string out;
  std::string precision = "f32";
  std::string x0;
  std::optional<std::size_t> flash_budget;
};

int cmd_codegen(const CodegenArgs& args) {
  const ValidatedProblem v = load_validated(args.problem);
  codegen::GenerateOptions options;
  try {
    options.precision = codegen::parse_precision(args.precision);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("--precision: ") + e.what());
  }
  options.flash_budget = args.flash_budget;
  if (!args.x0.empty()) {
    const std::vector<double> x0 = parse_list("--x0", args.x0);
    if (static_cast<int>(x0.size()) != v.dims().n) throw InputError("--x0: wrong length");
    options.x0 = Vector::Map(x0.data(), v.dims().n);
  }
  const codegen::GeneratedTree tree = codegen::generate(v, make_cache(v), args.out, options);
  std::cout << tree.manifest;
  return kExitSolved;
}

// ---- verify ------------------------------------------------------------------

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

Check check_dare(const ValidatedProblem& v, const SolverCache& cache) {
  const AugmentedCosts aug = augment_costs(v.cost(), cache.rho);
  const double res = dare_residual(v.dynamics(), aug.Q, aug.R, cache.Kinf, cache.Pinf);
  return {"dare", res < 1e-8, "residual " + short_num(res)};
}

Check check_kkt(const ValidatedProblem& v, const SolverCache& cache, std::mt19937_64& rng) {
  const ProblemDims& d = v.dims();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto random = [&](int rows, int cols) {
    return Matrix(Matrix::NullaryExpr(rows, cols, [&] { return unit(rng); }));
  };
  const Matrix q = random(d.n, d.N);
  const Matrix r = random(d.m, d.N - 1);
  const Vector x0 = random(d.n, 1);

  Solver<double> solver(v, cache);
  Workspace<double>& ws = solver.workspace();
  for (int k = 0; k < d.N; ++k) {
    for (int i = 0; i < d.n; ++i) ws.q_tilde[static_cast<std::size_t>(k * d.n + i)] = q(i, k);
  }
  for (int k = 0; k + 1 < d.N; ++k) {
    for (int i = 0; i < d.m; ++i) ws.r_tilde[static_cast<std::size_t>(k * d.m + i)] = r(i, k);
  }
  for (int i = 0; i < d.n; ++i) ws.x0[static_cast<std::size_t>(i)] = x0[i];
  backward_pass(ws, solver.data());
  forward_pass(ws, solver.data());

  const AugmentedCosts aug = augment_costs(v.cost(), cache.rho);
  const oracle::Trajectory ref =
      oracle::kkt_solve({&v.dynamics(), aug.Q, aug.R, cache.Pinf, q, r, x0});
  double err = 0.0;
  for (int k = 0; k < d.N; ++k) {
    for (int i = 0; i < d.n; ++i) {
      err = std::max(err, std::abs(ws.x[static_cast<std::size_t>(k * d.n + i)] - ref.x(i, k)));
    }
  }
  for (int k = 0; k + 1 < d.N; ++k) {
    for (int i = 0; i < d.m; ++i) {
      err = std::max(err, std::abs(ws.u[static_cast<std::size_t>(k * d.m + i)] - ref.u(i, k)));
    }
  }
  const double scale = std::max({1.0, ref.x.cwiseAbs().maxCoeff(), ref.u.cwiseAbs().maxCoeff()});
  return {"kkt", err < 1e-8 * scale, "max error " + short_num(err)};
}

Check check_projection(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  bool pass = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int len = trial % 2 == 0 ? 3 : 2;
    Vector z(len);
    for (int i = 0; i < len; ++i) z[i] = 2.0 * normal(rng);
    Vector fast = z;
    project_soc<double>(std::span<double>(fast.data(), static_cast<std::size_t>(len)));
    const Vector slow = oracle::grid_projection_oracle(z);
    const double gap = (fast - z).norm() - (slow - z).norm();
    // The exact projection is never farther than the grid's best point, and
    // the grid's best point is within its spacing of the exact one.
    worst = std::max(worst, std::abs((fast - slow).norm()));
    if (gap > 1e-12 || (fast - slow).norm() > oracle::grid_spacing(z)) pass = false;
  }
  return {"projection", pass, "max distance to grid optimum " + short_num(worst)};
}

/// Without an explicit x0, a seeded point projected onto the stage-0 state set.
/// Agreement is only meaningful on feasible instances; an infeasible one shows
/// up as a stalled primal residual and fails the check.
Check check_reference_admm(const ValidatedProblem& v, const SolverCache& cache,
                           std::mt19937_64& rng, std::optional<Vector> given_x0) {
  const ProblemDims& d = v.dims();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector x0(d.n);
  for (int i = 0; i < d.n; ++i) x0[i] = unit(rng);
  const ConstraintSet& cons = v.constraints();
  const Settings& s = v.settings();
  x0 = oracle::project_stage(x0, s.en_state_bound ? cons.state_bounds : std::nullopt,
                             s.en_state_soc ? cons.state_cones : std::vector<ConeSlice>{});
  if (given_x0) x0 = *given_x0;

  Settings tight = s;
  tight.abs_pri_tol = 1e-7;
  tight.abs_dua_tol = 1e-7;
  tight.max_iter = 200000;
  tight.check_termination = 10;
  const ValidatedProblem vt = v.with_settings(tight);
  Solver<double> solver(vt, cache);
  solver.set_x0(std::span<const double>(x0.data(), static_cast<std::size_t>(d.n)));
  const SolveReport<double>& report = solver.solve();

  const LinearCost zero{Matrix::Zero(d.n, d.N), Matrix::Zero(d.m, d.N - 1)};
  const oracle::ReferenceResult ref = oracle::reference_admm(v, cache, zero, x0);
  const Matrix x = Matrix::Map(report.x_traj.data(), d.n, d.N);
  const Matrix u = Matrix::Map(report.u_traj.data(), d.m, d.N - 1);
  const double J = oracle::objective(v, cache, zero, x, u);
  const double gap = std::abs(J - ref.objective);
  const bool pass = report.status == TerminationStatus::Solved && ref.pri_res < 1e-6 &&
                    gap <= 1e-4 * std::max(1.0, std::abs(ref.objective));
  return {"reference-admm", pass,
          "objective " + short_num(J) + " vs " + short_num(ref.objective) + ", solver " +
              std::string(to_string(report.status))};
}

struct VerifyArgs {
  std::string problem;
  std::string x0;
};

int cmd_verify(const VerifyArgs& args, unsigned seed) {
  const ValidatedProblem v = load_validated(args.problem);
  std::optional<Vector> x0;
  if (!args.x0.empty()) {
    const std::vector<double> values = parse_list("--x0", args.x0);
    if (static_cast<int>(values.size()) != v.dims().n) throw InputError("--x0: wrong length");
    x0 = Vector::Map(values.data(), v.dims().n);
  }
  const SolverCache cache = make_cache(v);
  std::mt19937_64 rng(seed);
  const std::vector<Check> checks{check_dare(v, cache), check_kkt(v, cache, rng),
                                  check_projection(rng),
                                  check_reference_admm(v, cache, rng, x0)};
  bool all = true;
  for (const Check& c : checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    all = all && c.pass;
  }
  return all ? kExitSolved : kExitInputError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tinysocp: SOCP model-predictive control solver tools"};
  app.require_subcommand(1);
  unsigned seed = 0;
  app.add_option("--seed", seed, "Seed for randomized content")->envname("TINYSOCP_SEED");

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one problem from a fixed initial state");
  solve_cmd->add_option("--problem", solve.problem, "Problem file")->required();
  solve_cmd->add_option("--x0", solve.x0, "Initial state, comma separated")->required();
  solve_cmd->add_option("--xref", solve.xref, "State reference table, one knot per row");
  solve_cmd->add_option("--out", solve.out, "Trajectory table (stdout if omitted)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a closed-loop scenario");
  sim_cmd->add_option("--scenario", sim.scenario, "safety-filter, rocket or spiral")
      ->required()
      ->check(CLI::IsMember({"safety-filter", "rocket", "spiral"}));
  sim_cmd->add_option("--steps", sim.steps, "Closed-loop steps (scenario default if omitted)");
  sim_cmd->add_option("--budget", sim.budget, "Iterations per step");
  sim_cmd->add_flag("--cold-start", sim.cold_start, "Reset iterates every step");
  sim_cmd->add_option("--perturb", sim.perturb, "Gaussian initial-state perturbation scale");
  sim_cmd->add_option("--out", sim.out, "Trajectory CSV")->required();

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Time fixed-iteration solves over a sweep");
  bench_cmd->add_option("--suite", bench_args.suite, "safety-filter or rocket")->required();
  bench_cmd->add_option("--sweep", bench_args.sweep, "state or horizon")->required();
  bench_cmd->add_option("--range", bench_args.range, "A..B, doubled from A")->required();
  bench_cmd->add_option("--iterations", bench_args.iterations, "ADMM iterations per solve");
  bench_cmd->add_option("--repeats", bench_args.repeats, "Timed solves per point");
  bench_cmd->add_option("--out", bench_args.out, "Sweep CSV")->required();

  CodegenArgs gen;
  auto* gen_cmd = app.add_subcommand("codegen", "Emit static-memory solver sources");
  gen_cmd->add_option("--problem", gen.problem, "Problem file")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--precision", gen.precision, "f32 or f64");
  gen_cmd->add_option("--x0", gen.x0, "Initial state baked into the example");
  gen_cmd->add_option("--flash-budget", gen.flash_budget, "Maximum data bytes");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle checks on a problem");
  verify_cmd->add_option("--problem", verify.problem, "Problem file")->required();
  verify_cmd->add_option("--x0", verify.x0, "Initial state for the reference-ADMM check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (*solve_cmd) return cmd_solve(solve);
    if (*sim_cmd) return cmd_simulate(sim, seed);
    if (*bench_cmd) return cmd_bench(bench_args);
    if (*gen_cmd) return cmd_codegen(gen);
    if (*verify_cmd) return cmd_verify(verify, seed);
  } catch (const ProblemFileError& e) {
    std::cerr << "error: problem file key '" << e.key() << "': " << e.what() << "\n";
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid problem (" << to_string(e.code()) << "): " << e.what() << "\n";
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const codegen::UnsupportedDimensions& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitInputError;
}
