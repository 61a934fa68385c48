#include "tinysocp/problem.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tinysocp {

std::string_view to_string(ValidationErrc code) {
  switch (code) {
    case ValidationErrc::NonFiniteEntry: return "NonFiniteEntry";
    case ValidationErrc::DimensionMismatch: return "DimensionMismatch";
    case ValidationErrc::InvalidDimensions: return "InvalidDimensions";
    case ValidationErrc::NotSymmetric: return "NotSymmetric";
    case ValidationErrc::QNotPositiveSemidefinite: return "QNotPositiveSemidefinite";
    case ValidationErrc::RNotPositiveDefinite: return "RNotPositiveDefinite";
    case ValidationErrc::InvalidCone: return "InvalidCone";
    case ValidationErrc::ConeOverlap: return "ConeOverlap";
    case ValidationErrc::BoundsInverted: return "BoundsInverted";
    case ValidationErrc::InvalidSettings: return "InvalidSettings";
  }
  return "Unknown";
}

ValidationError::ValidationError(ValidationErrc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

namespace {

[[noreturn]] void fail(ValidationErrc code, const std::string& detail) {
  throw ValidationError(code, detail);
}

void expect_shape(const Matrix& M, Eigen::Index rows, Eigen::Index cols,
                  const char* name) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << name << " is " << M.rows() << "x" << M.cols() << ", expected " << rows
       << "x" << cols;
    fail(ValidationErrc::DimensionMismatch, os.str());
  }
}

void expect_size(const Vector& v, Eigen::Index size, const char* name) {
  if (v.size() != size) {
    std::ostringstream os;
    os << name << " has " << v.size() << " entries, expected " << size;
    fail(ValidationErrc::DimensionMismatch, os.str());
  }
}

void expect_finite(const Eigen::Ref<const Matrix>& M, const char* name) {
  if (!M.allFinite()) fail(ValidationErrc::NonFiniteEntry, name);
}

// Symmetrizes M in place. Asymmetry above 1e-12 relative to the largest entry
// is rejected.
void symmetrize(Matrix& M, const char* name) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    fail(ValidationErrc::NotSymmetric, name);
  }
  M = 0.5 * (M + M.transpose()).eval();
}

void check_bounds(const std::optional<Bounds>& bounds, int dim, const char* name) {
  if (!bounds) return;
  expect_size(bounds->lower, dim, name);
  expect_size(bounds->upper, dim, name);
  for (int i = 0; i < dim; ++i) {
    const double lo = bounds->lower[i];
    const double hi = bounds->upper[i];
    if (std::isnan(lo) || std::isnan(hi) || lo == kInf || hi == -kInf) {
      fail(ValidationErrc::NonFiniteEntry, std::string(name) + " index " + std::to_string(i));
    }
    if (lo > hi) {
      fail(ValidationErrc::BoundsInverted, std::string(name) + " index " + std::to_string(i));
    }
  }
}

void check_cones(const std::vector<ConeSlice>& cones, const std::optional<Bounds>& bounds,
                 int dim, const char* name) {
  std::vector<bool> used(static_cast<std::size_t>(dim), false);
  for (const ConeSlice& cone : cones) {
    if (cone.len < 2 || cone.start < 0 || cone.start + cone.len > dim) {
      std::ostringstream os;
      os << name << " slice {" << cone.start << "," << cone.len << "} does not fit dimension "
         << dim;
      fail(ValidationErrc::InvalidCone, os.str());
    }
    for (int i = cone.start; i < cone.start + cone.len; ++i) {
      if (used[i]) {
        fail(ValidationErrc::ConeOverlap,
             std::string(name) + " slices share index " + std::to_string(i));
      }
      used[i] = true;
      if (bounds && (std::isfinite(bounds->lower[i]) || std::isfinite(bounds->upper[i]))) {
        fail(ValidationErrc::ConeOverlap,
             std::string(name) + " slice overlaps a finite bound at index " + std::to_string(i));
      }
    }
  }
}

}  // namespace

void validate_settings(const Settings& s) {
  if (!(s.rho > 0.0) || !std::isfinite(s.rho)) fail(ValidationErrc::InvalidSettings, "rho");
  if (!(s.abs_pri_tol > 0.0)) fail(ValidationErrc::InvalidSettings, "abs_pri_tol");
  if (!(s.abs_dua_tol > 0.0)) fail(ValidationErrc::InvalidSettings, "abs_dua_tol");
  if (s.max_iter < 1) fail(ValidationErrc::InvalidSettings, "max_iter");
  if (s.check_termination < 0) fail(ValidationErrc::InvalidSettings, "check_termination");
}

ValidatedProblem validate(const ProblemDefinition& problem) {
  ProblemDefinition def = problem;
  const auto [n, m, N] = def.dims;
  if (n < 1 || m < 1 || N < 2) {
    std::ostringstream os;
    os << "n=" << n << " m=" << m << " N=" << N << " (need n>=1, m>=1, N>=2)";
    fail(ValidationErrc::InvalidDimensions, os.str());
  }

  expect_shape(def.dynamics.A, n, n, "A");
  expect_shape(def.dynamics.B, n, m, "B");
  expect_size(def.dynamics.c, n, "c");
  expect_shape(def.cost.Q, n, n, "Q");
  expect_shape(def.cost.R, m, m, "R");

  expect_finite(def.dynamics.A, "A");
  expect_finite(def.dynamics.B, "B");
  expect_finite(def.dynamics.c, "c");
  expect_finite(def.cost.Q, "Q");
  expect_finite(def.cost.R, "R");

  symmetrize(def.cost.Q, "Q");
  symmetrize(def.cost.R, "R");

  Eigen::LDLT<Matrix> q_ldlt(def.cost.Q);
  if (q_ldlt.info() != Eigen::Success ||
      (q_ldlt.vectorD().array() < -1e-12 * std::max(1.0, def.cost.Q.cwiseAbs().maxCoeff()))
          .any()) {
    fail(ValidationErrc::QNotPositiveSemidefinite, "Q");
  }
  Eigen::LLT<Matrix> r_llt(def.cost.R);
  if (r_llt.info() != Eigen::Success ||
      (r_llt.matrixLLT().diagonal().array() <= 0.0).any()) {
    fail(ValidationErrc::RNotPositiveDefinite, "R");
  }

  const ConstraintSet& cons = def.constraints;
  check_bounds(cons.state_bounds, n, "state bounds");
  check_bounds(cons.input_bounds, m, "input bounds");
  check_cones(cons.state_cones, cons.state_bounds, n, "state cone");
  check_cones(cons.input_cones, cons.input_bounds, m, "input cone");

  validate_settings(def.settings);
  return ValidatedProblem(std::move(def));
}

ValidatedProblem ValidatedProblem::with_settings(const Settings& settings) const {
  validate_settings(settings);
  ProblemDefinition def = def_;
  def.settings = settings;
  return ValidatedProblem(std::move(def));
}

References References::zero(const ProblemDims& dims) {
  return {Matrix::Zero(dims.n, dims.N), Matrix::Zero(dims.m, dims.N - 1)};
}

LinearCost refs_to_linear_cost(const References& refs, const CostData& cost,
                               const Matrix& terminal_hessian) {
  const Eigen::Index N = refs.x_ref.cols();
  LinearCost out;
  out.q = -cost.Q * refs.x_ref;
  out.q.col(N - 1) = -terminal_hessian * refs.x_ref.col(N - 1);
  out.r = -cost.R * refs.u_ref;
  return out;
}

}  // namespace tinysocp
