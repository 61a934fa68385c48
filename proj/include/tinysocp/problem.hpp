#pragma once

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tinysocp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Problem size. States are indexed 0..N-1 (N knot points), inputs 0..N-2.
struct ProblemDims {
  int n = 0;
  int m = 0;
  int N = 0;

  friend bool operator==(const ProblemDims&, const ProblemDims&) = default;
};

/// x_{k+1} = A x_k + B u_k + c
struct LinearDynamics {
  Matrix A;
  Matrix B;
  Vector c;
};

/// Stage weights. The terminal weight is the infinite-horizon cost-to-go and is
/// never user supplied.
struct CostData {
  Matrix Q;
  Matrix R;
};

/// Second-order cone over a contiguous slice. The last element of the slice is
/// the apex coordinate: x[start+len-1] >= ||x[start .. start+len-2]||.
struct ConeSlice {
  int start = 0;
  int len = 0;

  int apex() const { return start + len - 1; }
  friend bool operator==(const ConeSlice&, const ConeSlice&) = default;
};

struct Bounds {
  Vector lower;
  Vector upper;
};

/// Constraints applied identically at every stage.
struct ConstraintSet {
  std::optional<Bounds> state_bounds;
  std::optional<Bounds> input_bounds;
  std::vector<ConeSlice> state_cones;
  std::vector<ConeSlice> input_cones;
};

struct Settings {
  double rho = 1.0;
  double abs_pri_tol = 1e-3;
  double abs_dua_tol = 1e-3;
  int max_iter = 500;
  /// Residual check interval in iterations; 0 never checks and always runs
  /// max_iter iterations.
  int check_termination = 10;
  bool en_state_bound = true;
  bool en_input_bound = true;
  bool en_state_soc = true;
  bool en_input_soc = true;
};

struct ProblemDefinition {
  ProblemDims dims;
  LinearDynamics dynamics;
  CostData cost;
  ConstraintSet constraints;
  Settings settings;
};

enum class ValidationErrc {
  NonFiniteEntry,
  DimensionMismatch,
  InvalidDimensions,
  NotSymmetric,
  QNotPositiveSemidefinite,
  RNotPositiveDefinite,
  InvalidCone,
  ConeOverlap,
  BoundsInverted,
  InvalidSettings,
};

std::string_view to_string(ValidationErrc code);

class ValidationError : public std::runtime_error {
 public:
  ValidationError(ValidationErrc code, const std::string& detail);

  ValidationErrc code() const noexcept { return code_; }

 private:
  ValidationErrc code_;
};

/// A problem that passed validate(). Cost matrices are exactly symmetric.
class ValidatedProblem {
 public:
  const ProblemDefinition& definition() const { return def_; }
  const ProblemDims& dims() const { return def_.dims; }
  const LinearDynamics& dynamics() const { return def_.dynamics; }
  const CostData& cost() const { return def_.cost; }
  const ConstraintSet& constraints() const { return def_.constraints; }
  const Settings& settings() const { return def_.settings; }

  /// Copy with different solver settings; settings are re-validated.
  ValidatedProblem with_settings(const Settings& settings) const;

 private:
  friend ValidatedProblem validate(const ProblemDefinition& problem);
  explicit ValidatedProblem(ProblemDefinition def) : def_(std::move(def)) {}

  ProblemDefinition def_;
};

/// Checks every invariant of the problem data and returns a symmetrized copy.
/// Throws ValidationError naming the first violated invariant.
ValidatedProblem validate(const ProblemDefinition& problem);

void validate_settings(const Settings& settings);

/// Stacked per-knot references, one column per knot: x_ref is n x N,
/// u_ref is m x (N-1).
struct References {
  Matrix x_ref;
  Matrix u_ref;

  static References zero(const ProblemDims& dims);
};

struct LinearCost {
  Matrix q;  // n x N
  Matrix r;  // m x (N-1)
};

/// Tracking-cost completion: q_k = -Q x_ref_k, q_N = -P_terminal x_ref_N,
/// r_k = -R u_ref_k.
LinearCost refs_to_linear_cost(const References& refs, const CostData& cost,
                               const Matrix& terminal_hessian);

}  // namespace tinysocp
