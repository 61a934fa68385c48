#pragma once

#include "tinysocp/codegen.hpp"
#include "tinysocp/problem.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tinysocp::bench {

inline constexpr double kGravity = 9.81;

/// A closed-loop scenario: the MPC problem, where the plant starts, where it
/// should end, and how references are laid over the horizon at each step.
struct Scenario {
  std::string id;
  ProblemDefinition problem;
  Vector x_init;
  Vector goal;
  double dt = 0.0;
  /// Closed-loop length the scenario is tuned for.
  int default_steps = 100;
  /// References for the horizon starting at step `step` from state x.
  std::function<References(int step, const Vector& x)> references;
  /// Input applied when the solver is bypassed. Absent for scenarios without
  /// a nominal policy.
  std::function<Vector(int step, const Vector& x)> nominal;
};

struct SafetyFilterConfig {
  int axes = 1;
  int N = 20;
  double dt = 0.02;
  double position_limit = 0.6;
  double input_limit = 20.0;
  double amplitude = 1.2;
  double frequency_hz = 0.25;
  double kp = 100.0;
  double kd = 20.0;
  double position_weight = 1.0;
  double velocity_weight = 1.0;
  double input_weight = 0.01;
  double rho = 100.0;
};

/// Stacked per-axis double integrators, state ordered (p_1, v_1, p_2, v_2, ...).
/// The nominal policy is PD tracking of a sinusoid; references are the
/// nominal policy rolled out over the horizon.
Scenario make_safety_filter(const SafetyFilterConfig& config = {});

struct RocketConfig {
  int N = 16;
  double dt = 0.05;
  double gravity = kGravity;
  Vector x_init = (Vector(6) << 12.0, -8.0, 15.0, 6.0, 4.0, -1.0).finished();
  /// Seconds over which the reference descends to the goal.
  double descent_time = 5.0;
  double position_weight = 10.0;
  double velocity_weight = 1.0;
  double input_weight = 0.1;
  double rho = 10.0;
  double tolerance = 0.01;
};

/// Point mass with gravity in c. Input cone over all three thrust
/// components, apex on the vertical one; altitude kept non-negative.
Scenario make_rocket_landing(const RocketConfig& config = {});

struct SpiralConfig {
  int N = 20;
  double dt = 0.02;
  double gravity = kGravity;
  double radius = 1.0;
  double start_altitude = 3.0;
  double descent_rate = 0.5;
  double angular_rate = 1.5;
  double input_limit = 20.0;
  double position_weight = 20.0;
  double velocity_weight = 1.0;
  double input_weight = 0.1;
  double rho = 10.0;
  double tolerance = 1e-3;
};

/// Point mass tracking a cylindrical helix that descends to the ground, then
/// the goal at the origin. A 45 degree cone on position (apex = altitude)
/// turns the descent into a spiral.
Scenario make_spiral_landing(const SpiralConfig& config = {});

/// Adds seeded Gaussian noise of the given scale to the initial state.
void perturb_initial_state(Scenario& scenario, unsigned seed, double scale);

struct ClosedLoopOptions {
  int steps = 100;
  /// Per-step iteration budget (max_iter).
  int budget = 100;
  /// Zero the iterates before each solve instead of shifting the previous plan.
  bool cold_start = false;
  /// Apply scenario.nominal instead of solving.
  bool bypass_solver = false;
};

struct ClosedLoopStep {
  int step = 0;
  double t = 0.0;
  Vector x;  // state at which the input was applied
  Vector u;
  double pri_res = 0.0;
  double dua_res = 0.0;
  int iterations = 0;
  double violation = 0.0;        // box and cone excess of (x_next, u)
  double input_cone_excess = 0.0;
};

struct ClosedLoopMetrics {
  double total_violation = 0.0;
  double landing_error = 0.0;
  double max_input_cone_excess = 0.0;
  int total_iterations = 0;
};

struct ClosedLoopResult {
  ClosedLoopMetrics metrics;
  std::vector<ClosedLoopStep> trajectory;
  Vector final_state;
};

/// Per step: x0 <- plant state, references from the scenario, solve with
/// max_iter = budget, apply u_1 to the model dynamics, then shift the plan
/// for the next warm start.
ClosedLoopResult run_closed_loop(const Scenario& scenario, const ClosedLoopOptions& options);

/// Positive-part violation of the scenario's constraints. Disabled
/// constraint groups are still measured, so unconstrained runs can be scored.
double state_violation(const ProblemDefinition& problem, const Vector& x);
double input_violation(const ProblemDefinition& problem, const Vector& u);
double input_cone_excess(const ProblemDefinition& problem, const Vector& u);

/// `step,t,x0..,u0..,pri_res,dua_res,iters`.
std::string trajectory_csv(const ClosedLoopResult& result);
/// One JSON object on one line.
std::string metrics_record(const Scenario& scenario, const ClosedLoopOptions& options,
                           const ClosedLoopResult& result);

enum class Suite { SafetyFilter, Rocket };
enum class Sweep { State, Horizon };

Suite parse_suite(std::string_view text);
Sweep parse_sweep(std::string_view text);

struct SweepPoint {
  int n = 0;
  int m = 0;
  int N = 0;
  int iterations = 0;
  double mean_iteration_seconds = 0.0;
  double min_iteration_seconds = 0.0;
  double max_iteration_seconds = 0.0;
  codegen::Footprint footprint;
};

struct SweepOptions {
  Suite suite = Suite::Rocket;
  Sweep sweep = Sweep::Horizon;
  std::vector<int> values;
  int iterations = 50;
  int repeats = 20;
};

/// Problem for one sweep point. Safety-filter state sweeps take n = value
/// (m = n/2, N = 10); horizon sweeps take N = value (n = 10, m = 5 for the
/// safety filter, the rocket otherwise).
ProblemDefinition sweep_problem(Suite suite, Sweep sweep, int value);

/// Times fixed-iteration solves (no termination checks) per point.
std::vector<SweepPoint> run_sweep(const SweepOptions& options);

/// Least-squares slope of log(y) against log(x).
double fit_exponent(const std::vector<double>& x, const std::vector<double>& y);

std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace tinysocp::bench
