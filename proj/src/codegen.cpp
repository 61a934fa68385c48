#include "tinysocp/codegen.hpp"

#include "tinysocp/problem_io.hpp"
#include "tinysocp/solver.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace tinysocp::codegen {

std::string_view to_string(Precision precision) {
  return precision == Precision::F32 ? "f32" : "f64";
}

Precision parse_precision(std::string_view text) {
  if (text == "f32") return Precision::F32;
  if (text == "f64") return Precision::F64;
  throw std::invalid_argument("precision must be f32 or f64, got '" + std::string(text) + "'");
}

std::size_t scalar_bytes(Precision precision) {
  return precision == Precision::F32 ? sizeof(float) : sizeof(double);
}

namespace {

struct EnabledConstraints {
  bool state_box = false;
  bool input_box = false;
  std::size_t cones = 0;
};

EnabledConstraints enabled(const ValidatedProblem& problem) {
  const Settings& s = problem.settings();
  const ConstraintSet& c = problem.constraints();
  EnabledConstraints e;
  e.state_box = s.en_state_bound && c.state_bounds.has_value();
  e.input_box = s.en_input_bound && c.input_bounds.has_value();
  if (s.en_state_soc) e.cones += c.state_cones.size();
  if (s.en_input_soc) e.cones += c.input_cones.size();
  return e;
}

}  // namespace

Footprint estimate_footprint(const ValidatedProblem& problem, Precision precision) {
  const auto n = static_cast<std::size_t>(problem.dims().n);
  const auto m = static_cast<std::size_t>(problem.dims().m);
  const auto N = static_cast<std::size_t>(problem.dims().N);
  const std::size_t s = scalar_bytes(precision);
  const EnabledConstraints e = enabled(problem);

  std::size_t data = 4 * n * n + 2 * m * m + 2 * n * m + 2 * n + m;
  if (e.state_box) data += 2 * n;
  if (e.input_box) data += 2 * m;
  Footprint f;
  f.data_bytes = s * data + 2 * sizeof(std::int32_t) * e.cones;
  f.workspace_bytes = s * (8 * n * N + 8 * m * (N - 1) + n + m);
  return f;
}

namespace {

class Emitter {
 public:
  Emitter(const ValidatedProblem& problem, const SolverCache& cache,
          const GenerateOptions& options)
      : problem_(problem),
        data_(SolverData<double>::from(problem, cache)),
        options_(options),
        f32_(options.precision == Precision::F32) {}

  SourceTree render() const {
    SourceTree tree;
    tree["src/data_workspace.hpp"] = data_header();
    tree["src/data_workspace.cpp"] = data_source();
    tree["solver/tiny_solver.hpp"] = solver_header();
    tree["solver/tiny_solver.cpp"] = solver_source();
    tree["src/main_example.cpp"] = main_source();
    tree["manifest.txt"] = manifest();
    return tree;
  }

 private:
  std::string literal(double value) const {
    if (std::isinf(value)) return value > 0 ? "INF" : "-INF";
    char buf[64];
    if (f32_) {
      std::snprintf(buf, sizeof buf, "%af", static_cast<double>(static_cast<float>(value)));
    } else {
      std::snprintf(buf, sizeof buf, "%a", value);
    }
    return buf;
  }

  std::string array(const std::string& decl, const std::vector<double>& values) const {
    std::ostringstream os;
    os << decl << " = {";
    for (std::size_t i = 0; i < values.size(); ++i) {
      os << (i % 4 == 0 ? "\n    " : " ") << literal(values[i]) << (i + 1 < values.size() ? "," : "");
    }
    os << "\n};\n";
    return os.str();
  }

  static std::vector<double> column_major(const Matrix& M) {
    // One knot per column -> stage-major buffer.
    return {M.data(), M.data() + M.size()};
  }

  bool has_state_box() const { return !data_.x_min.empty(); }
  bool has_input_box() const { return !data_.u_min.empty(); }

  std::string data_header() const {
    const ProblemDims& d = data_.dims;
    const Settings& s = problem_.settings();
    std::ostringstream os;
    os << "// Generated by " << kGeneratorVersion << ". Problem data and static workspace.\n"
       << "#pragma once\n\n#include <limits>\n\nnamespace tiny {\n\n"
       << "using Real = " << (f32_ ? "float" : "double") << ";\n\n"
       << "inline constexpr int NSTATES = " << d.n << ";\n"
       << "inline constexpr int NINPUTS = " << d.m << ";\n"
       << "inline constexpr int NHORIZON = " << d.N << ";\n"
       << "inline constexpr int NSTATE_CONES = " << data_.state_cones.size() << ";\n"
       << "inline constexpr int NINPUT_CONES = " << data_.input_cones.size() << ";\n\n"
       << "inline constexpr Real RHO = " << literal(data_.rho) << ";\n"
       << "inline constexpr Real ABS_PRI_TOL = " << literal(s.abs_pri_tol) << ";\n"
       << "inline constexpr Real ABS_DUA_TOL = " << literal(s.abs_dua_tol) << ";\n"
       << "inline constexpr int MAX_ITER = " << s.max_iter << ";\n"
       << "inline constexpr int CHECK_TERMINATION = " << s.check_termination << ";\n"
       << "inline constexpr Real INF = std::numeric_limits<Real>::infinity();\n\n"
       << "extern const Real A[NSTATES * NSTATES];\n"
       << "extern const Real B[NSTATES * NINPUTS];\n"
       << "extern const Real c[NSTATES];\n"
       << "extern const Real Q[NSTATES * NSTATES];\n"
       << "extern const Real R[NINPUTS * NINPUTS];\n"
       << "extern const Real Kinf[NINPUTS * NSTATES];\n"
       << "extern const Real Pinf[NSTATES * NSTATES];\n"
       << "extern const Real C1[NINPUTS * NINPUTS];\n"
       << "extern const Real C2[NSTATES * NSTATES];\n"
       << "extern const Real C3[NINPUTS];\n"
       << "extern const Real C4[NSTATES];\n";
    if (has_state_box()) {
      os << "extern const Real x_min[NSTATES];\nextern const Real x_max[NSTATES];\n";
    }
    if (has_input_box()) {
      os << "extern const Real u_min[NINPUTS];\nextern const Real u_max[NINPUTS];\n";
    }
    os << "\nstruct ConeSlice {\n  int start;\n  int len;\n};\n";
    if (!data_.state_cones.empty()) os << "extern const ConeSlice state_cones[NSTATE_CONES];\n";
    if (!data_.input_cones.empty()) os << "extern const ConeSlice input_cones[NINPUT_CONES];\n";
    os << "\n// Mutable at runtime.\n"
       << "extern Real x0[NSTATES];\n"
       << "extern Real x_ref[NSTATES * NHORIZON];\n"
       << "extern Real u_ref[NINPUTS * (NHORIZON - 1)];\n\n"
       << "struct Workspace {\n";
    for (const char* name : {"x", "z", "z_prev", "y", "p", "q", "q_tilde"}) {
      os << "  Real " << name << "[NSTATES * NHORIZON];\n";
    }
    for (const char* name : {"u", "w", "w_prev", "g", "d", "r", "r_tilde"}) {
      os << "  Real " << name << "[NINPUTS * (NHORIZON - 1)];\n";
    }
    os << "  Real scratch[NINPUTS];\n"
       << "  Real pri_res;\n  Real dua_res;\n  int iter;\n  int status;\n};\n\n"
       << "extern Workspace work;\n\n}  // namespace tiny\n";
    return os.str();
  }

  std::string data_source() const {
    const ProblemDims& d = data_.dims;
    std::ostringstream os;
    os << "// Generated by " << kGeneratorVersion << ".\n"
       << "#include \"data_workspace.hpp\"\n\nnamespace tiny {\n\n"
       << array("const Real A[NSTATES * NSTATES]", data_.A)
       << array("const Real B[NSTATES * NINPUTS]", data_.B)
       << array("const Real c[NSTATES]", data_.c)
       << array("const Real Q[NSTATES * NSTATES]", data_.Q)
       << array("const Real R[NINPUTS * NINPUTS]", data_.R)
       << array("const Real Kinf[NINPUTS * NSTATES]", data_.Kinf)
       << array("const Real Pinf[NSTATES * NSTATES]", data_.Pinf)
       << array("const Real C1[NINPUTS * NINPUTS]", data_.C1)
       << array("const Real C2[NSTATES * NSTATES]", data_.C2)
       << array("const Real C3[NINPUTS]", data_.C3)
       << array("const Real C4[NSTATES]", data_.C4);
    if (has_state_box()) {
      os << array("const Real x_min[NSTATES]", data_.x_min)
         << array("const Real x_max[NSTATES]", data_.x_max);
    }
    if (has_input_box()) {
      os << array("const Real u_min[NINPUTS]", data_.u_min)
         << array("const Real u_max[NINPUTS]", data_.u_max);
    }
    const auto cones = [&os](const char* name, const char* count,
                             const std::vector<ConeSlice>& slices) {
      if (slices.empty()) return;
      os << "const ConeSlice " << name << "[" << count << "] = {";
      for (std::size_t i = 0; i < slices.size(); ++i) {
        os << (i ? ", " : "") << "{" << slices[i].start << ", " << slices[i].len << "}";
      }
      os << "};\n";
    };
    cones("state_cones", "NSTATE_CONES", data_.state_cones);
    cones("input_cones", "NINPUT_CONES", data_.input_cones);

    std::vector<double> x0(static_cast<std::size_t>(d.n), 0.0);
    if (options_.x0.size() == d.n) x0.assign(options_.x0.data(), options_.x0.data() + d.n);
    std::vector<double> x_ref(static_cast<std::size_t>(d.n) * d.N, 0.0);
    std::vector<double> u_ref(static_cast<std::size_t>(d.m) * (d.N - 1), 0.0);
    if (options_.references) {
      x_ref = column_major(options_.references->x_ref);
      u_ref = column_major(options_.references->u_ref);
    }
    os << "\n" << array("Real x0[NSTATES]", x0)
       << array("Real x_ref[NSTATES * NHORIZON]", x_ref)
       << array("Real u_ref[NINPUTS * (NHORIZON - 1)]", u_ref)
       << "\nWorkspace work{};\n\n}  // namespace tiny\n";
    return os.str();
  }

  static std::string solver_header() {
    return std::string("// Generated by ") + kGeneratorVersion + R"(.
#pragma once

#include "../src/data_workspace.hpp"

namespace tiny {

enum Status : int { UNSOLVED = 0, SOLVED = 1, MAX_ITERS = 2 };

// Rebuilds the linear cost terms from x_ref and u_ref. Call after changing them.
void update_references(Workspace& ws);
void update_linear_costs(Workspace& ws);
void backward_pass(Workspace& ws);
void forward_pass(Workspace& ws);
void project_soc(Real* z, int len);
void slack_update(Workspace& ws);
void dual_update(Workspace& ws);
void compute_residuals(Workspace& ws);
void warm_start_shift(Workspace& ws);

// Runs ADMM from the current iterates. Returns a Status.
int tiny_solve(Workspace& ws);

}  // namespace tiny
)";
  }

  std::string solver_source() const {
    std::ostringstream os;
    os << "// Generated by " << kGeneratorVersion << R"(.
#include "tiny_solver.hpp"

#include <algorithm>
#include <cmath>

namespace tiny {

namespace {
constexpr int NX = NSTATES * NHORIZON;
constexpr int NU = NINPUTS * (NHORIZON - 1);
}  // namespace

void update_references(Workspace& ws) {
  for (int k = 0; k < NHORIZON; ++k) {
    const Real* weight = (k == NHORIZON - 1) ? Pinf : Q;
    const Real* ref = x_ref + k * NSTATES;
    Real* q = ws.q + k * NSTATES;
    for (int i = 0; i < NSTATES; ++i) {
      Real acc = Real(0);
      for (int j = 0; j < NSTATES; ++j) acc += weight[i * NSTATES + j] * ref[j];
      q[i] = -acc;
    }
  }
  for (int k = 0; k < NHORIZON - 1; ++k) {
    const Real* ref = u_ref + k * NINPUTS;
    Real* r = ws.r + k * NINPUTS;
    for (int i = 0; i < NINPUTS; ++i) {
      Real acc = Real(0);
      for (int j = 0; j < NINPUTS; ++j) acc += R[i * NINPUTS + j] * ref[j];
      r[i] = -acc;
    }
  }
}

void update_linear_costs(Workspace& ws) {
  for (int i = 0; i < NX; ++i) ws.q_tilde[i] = ws.q[i] + RHO * (ws.y[i] - ws.z[i]);
  for (int i = 0; i < NU; ++i) ws.r_tilde[i] = ws.r[i] + RHO * (ws.g[i] - ws.w[i]);
}

void backward_pass(Workspace& ws) {
  for (int i = 0; i < NSTATES; ++i) {
    ws.p[(NHORIZON - 1) * NSTATES + i] = ws.q_tilde[(NHORIZON - 1) * NSTATES + i];
  }
  Real* tmp = ws.scratch;
  for (int k = NHORIZON - 2; k >= 0; --k) {
    const Real* p_next = ws.p + (k + 1) * NSTATES;
    const Real* r_k = ws.r_tilde + k * NINPUTS;
    const Real* q_k = ws.q_tilde + k * NSTATES;
    Real* p_k = ws.p + k * NSTATES;
    Real* d_k = ws.d + k * NINPUTS;
    for (int i = 0; i < NINPUTS; ++i) {
      Real acc = Real(0);
      for (int j = 0; j < NSTATES; ++j) acc += B[j * NINPUTS + i] * p_next[j];
      tmp[i] = acc + r_k[i] + C3[i];
    }
    for (int i = 0; i < NINPUTS; ++i) {
      Real acc = Real(0);
      for (int j = 0; j < NINPUTS; ++j) acc += C1[i * NINPUTS + j] * tmp[j];
      d_k[i] = acc;
    }
    for (int i = 0; i < NSTATES; ++i) {
      Real cl = Real(0);
      for (int j = 0; j < NSTATES; ++j) cl += C2[i * NSTATES + j] * p_next[j];
      Real fb = Real(0);
      for (int j = 0; j < NINPUTS; ++j) fb += Kinf[j * NSTATES + i] * r_k[j];
      p_k[i] = q_k[i] + cl - fb + C4[i];
    }
  }
}

void forward_pass(Workspace& ws) {
  for (int i = 0; i < NSTATES; ++i) ws.x[i] = x0[i];
  for (int k = 0; k < NHORIZON - 1; ++k) {
    const Real* x_k = ws.x + k * NSTATES;
    const Real* d_k = ws.d + k * NINPUTS;
    Real* u_k = ws.u + k * NINPUTS;
    Real* x_next = ws.x + (k + 1) * NSTATES;
    for (int i = 0; i < NINPUTS; ++i) {
      Real acc = Real(0);
      for (int j = 0; j < NSTATES; ++j) acc += Kinf[i * NSTATES + j] * x_k[j];
      u_k[i] = -acc - d_k[i];
    }
    for (int i = 0; i < NSTATES; ++i) {
      Real ax = Real(0);
      for (int j = 0; j < NSTATES; ++j) ax += A[i * NSTATES + j] * x_k[j];
      Real bu = Real(0);
      for (int j = 0; j < NINPUTS; ++j) bu += B[i * NINPUTS + j] * u_k[j];
      x_next[i] = ax + bu + c[i];
    }
  }
}

// The only division in the solver.
void project_soc(Real* z, int len) {
  const int head = len - 1;
  const Real a = z[head];
  Real sq = Real(0);
  for (int i = 0; i < head; ++i) sq += z[i] * z[i];
  const Real norm = std::sqrt(sq);
  if (norm <= -a) {
    for (int i = 0; i < len; ++i) z[i] = Real(0);
  } else if (norm <= a) {
    return;
  } else {
    const Real scale = Real(0.5) * (Real(1) + a / norm);
    for (int i = 0; i < head; ++i) z[i] = scale * z[i];
    z[head] = scale * norm;
  }
}

void slack_update(Workspace& ws) {
  for (int i = 0; i < NX; ++i) ws.z_prev[i] = ws.z[i];
  for (int i = 0; i < NU; ++i) ws.w_prev[i] = ws.w[i];
  for (int i = 0; i < NX; ++i) ws.z[i] = ws.x[i] + ws.y[i];
  for (int i = 0; i < NU; ++i) ws.w[i] = ws.u[i] + ws.g[i];
)";
    const auto stage_loop = [&os](const char* count, const char* width, const char* buf,
                                  bool box, const char* lo, const char* hi, const char* cones,
                                  const char* ncones, bool has_cones) {
      if (!box && !has_cones) return;
      os << "  for (int k = 0; k < " << count << "; ++k) {\n"
         << "    Real* s = ws." << buf << " + k * " << width << ";\n";
      if (box) {
        os << "    for (int i = 0; i < " << width << "; ++i) s[i] = std::max(" << lo
           << "[i], std::min(" << hi << "[i], s[i]));\n";
      }
      if (has_cones) {
        os << "    for (int j = 0; j < " << ncones << "; ++j) project_soc(s + " << cones
           << "[j].start, " << cones << "[j].len);\n";
      }
      os << "  }\n";
    };
    stage_loop("NHORIZON", "NSTATES", "z", has_state_box(), "x_min", "x_max", "state_cones",
               "NSTATE_CONES", !data_.state_cones.empty());
    stage_loop("NHORIZON - 1", "NINPUTS", "w", has_input_box(), "u_min", "u_max", "input_cones",
               "NINPUT_CONES", !data_.input_cones.empty());
    os << R"(}

void dual_update(Workspace& ws) {
  for (int i = 0; i < NX; ++i) ws.y[i] = ws.y[i] + (ws.x[i] - ws.z[i]);
  for (int i = 0; i < NU; ++i) ws.g[i] = ws.g[i] + (ws.u[i] - ws.w[i]);
}

void compute_residuals(Workspace& ws) {
  Real pri = Real(0);
  Real dua = Real(0);
  for (int i = 0; i < NX; ++i) {
    pri = std::max(pri, std::abs(ws.x[i] - ws.z[i]));
    dua = std::max(dua, std::abs(ws.z[i] - ws.z_prev[i]));
  }
  for (int i = 0; i < NU; ++i) {
    pri = std::max(pri, std::abs(ws.u[i] - ws.w[i]));
    dua = std::max(dua, std::abs(ws.w[i] - ws.w_prev[i]));
  }
  ws.pri_res = pri;
  ws.dua_res = RHO * dua;
}

namespace {
void shift(Real* buf, int width, int total) {
  if (total <= width) return;
  for (int i = 0; i + width < total; ++i) buf[i] = buf[i + width];
  for (int i = total - width; i < total; ++i) buf[i] = buf[i - width];
}
}  // namespace

void warm_start_shift(Workspace& ws) {
  shift(ws.x, NSTATES, NX);
  shift(ws.z, NSTATES, NX);
  shift(ws.y, NSTATES, NX);
  shift(ws.u, NINPUTS, NU);
  shift(ws.w, NINPUTS, NU);
  shift(ws.g, NINPUTS, NU);
}

int tiny_solve(Workspace& ws) {
  ws.status = UNSOLVED;
  for (int it = 1; it <= MAX_ITER; ++it) {
    update_linear_costs(ws);
    backward_pass(ws);
    forward_pass(ws);
    slack_update(ws);
    dual_update(ws);
    ws.iter = it;
)";
    if (problem_.settings().check_termination > 0) {
      os << R"(    if (it % CHECK_TERMINATION == 0) {
      compute_residuals(ws);
      if (ws.pri_res < ABS_PRI_TOL && ws.dua_res < ABS_DUA_TOL) {
        ws.status = SOLVED;
        return ws.status;
      }
    }
)";
    }
    os << R"(  }
  compute_residuals(ws);
  ws.status = MAX_ITERS;
  return ws.status;
}

}  // namespace tiny
)";
    return os.str();
  }

  static std::string main_source() {
    return std::string("// Generated by ") + kGeneratorVersion + R"(.
// Solves once from the embedded x0 and references and prints the iterates
// as hex floats, one buffer per line.
#include <cstdint>
#include <cstdio>

#include "../solver/tiny_solver.hpp"

namespace {
void dump(const char* name, const tiny::Real* values, int count) {
  std::printf("%s", name);
  for (int i = 0; i < count; ++i) std::printf(" %a", static_cast<double>(values[i]));
  std::printf("\n");
}
}  // namespace

int main() {
  tiny::Workspace& ws = tiny::work;
  tiny::update_references(ws);
  const int status = tiny::tiny_solve(ws);
  std::printf("status %d\niter %d\n", status, ws.iter);
  dump("pri_res", &ws.pri_res, 1);
  dump("dua_res", &ws.dua_res, 1);
  constexpr int nx = tiny::NSTATES * tiny::NHORIZON;
  constexpr int nu = tiny::NINPUTS * (tiny::NHORIZON - 1);
  dump("x", ws.x, nx);
  dump("u", ws.u, nu);
  dump("z", ws.z, nx);
  dump("w", ws.w, nu);
  dump("y", ws.y, nx);
  dump("g", ws.g, nu);
  return 0;
}
)";
  }

  std::string manifest() const {
    const ProblemDims& d = data_.dims;
    const Footprint f = estimate_footprint(problem_, options_.precision);
    std::ostringstream os;
    os << "generator: " << kGeneratorVersion << "\n"
       << "precision: " << to_string(options_.precision) << "\n"
       << "nstates: " << d.n << "\nninputs: " << d.m << "\nnhorizon: " << d.N << "\n"
       << "state_cones: " << data_.state_cones.size() << "\n"
       << "input_cones: " << data_.input_cones.size() << "\n"
       << "data_bytes: " << f.data_bytes << "\n"
       << "workspace_bytes: " << f.workspace_bytes << "\n"
       << "data_formula: s*(4n^2 + 2m^2 + 2nm + 2n + m + 2n[state box] + 2m[input box])"
          " + 8*cones\n"
       << "workspace_formula: s*(8nN + 8m(N-1) + n + m)\n"
       << "files: solver/tiny_solver.hpp solver/tiny_solver.cpp src/data_workspace.hpp "
          "src/data_workspace.cpp src/main_example.cpp\n"
       << "build: c++ -std=c++20 -O2 -Wall -Wextra -Wpedantic -Werror -ffp-contract=off "
          "solver/tiny_solver.cpp src/data_workspace.cpp src/main_example.cpp -o tiny_example\n";
    return os.str();
  }

  const ValidatedProblem& problem_;
  SolverData<double> data_;
  const GenerateOptions& options_;
  bool f32_;
};

}  // namespace

SourceTree render(const ValidatedProblem& problem, const SolverCache& cache,
                  const GenerateOptions& options) {
  const ProblemDims& d = problem.dims();
  if (options.x0.size() != 0 && options.x0.size() != d.n) {
    throw std::invalid_argument("x0 has wrong size");
  }
  if (options.references && (options.references->x_ref.rows() != d.n ||
                              options.references->x_ref.cols() != d.N ||
                              options.references->u_ref.rows() != d.m ||
                              options.references->u_ref.cols() != d.N - 1)) {
    throw std::invalid_argument("references have wrong shape");
  }
  if (options.flash_budget) {
    const Footprint f = estimate_footprint(problem, options.precision);
    if (f.data_bytes > *options.flash_budget) {
      throw UnsupportedDimensions("embedded data needs " + std::to_string(f.data_bytes) +
                                  " bytes, flash budget is " +
                                  std::to_string(*options.flash_budget));
    }
  }
  return Emitter(problem, cache, options).render();
}

GeneratedTree generate(const ValidatedProblem& problem, const SolverCache& cache,
                       const std::filesystem::path& out_dir, const GenerateOptions& options) {
  const SourceTree tree = render(problem, cache, options);
  GeneratedTree result;
  result.root = out_dir;
  result.footprint = estimate_footprint(problem, options.precision);
  try {
    for (const auto& [name, text] : tree) {
      const std::filesystem::path path = out_dir / name;
      std::filesystem::create_directories(path.parent_path());
      write_file_atomic(path, text);
      result.files.push_back(name);
    }
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
  result.manifest = tree.at("manifest.txt");
  return result;
}

std::string strip_non_code(const std::string& src) {
  std::string out = src;
  enum class State { Code, Line, Block, Str, Chr } state = State::Code;
  bool line_start = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const char ch = src[i];
    const char next = i + 1 < src.size() ? src[i + 1] : '\0';
    const auto blank = [&out](std::size_t at) {
      if (out[at] != '\n') out[at] = ' ';
    };
    switch (state) {
      case State::Code:
        if (line_start && src.compare(i, 8, "#include") == 0) {
          while (i < src.size() && src[i] != '\n') blank(i++);
          --i;
        } else if (ch == '/' && next == '/') {
          state = State::Line;
          blank(i);
        } else if (ch == '/' && next == '*') {
          state = State::Block;
          blank(i);
          blank(++i);
        } else if (ch == '"') {
          state = State::Str;
        } else if (ch == '\'') {
          state = State::Chr;
        }
        break;
      case State::Line:
        if (ch == '\n') {
          state = State::Code;
        } else {
          blank(i);
        }
        break;
      case State::Block:
        if (ch == '*' && next == '/') {
          blank(i);
          blank(++i);
          state = State::Code;
        } else {
          blank(i);
        }
        break;
      case State::Str:
      case State::Chr:
        if (ch == '\\') {
          blank(i);
          if (i + 1 < out.size()) blank(++i);
        } else if ((state == State::Str && ch == '"') || (state == State::Chr && ch == '\'')) {
          state = State::Code;
        } else {
          blank(i);
        }
        break;
    }
    if (i < src.size()) {
      if (src[i] == '\n') {
        line_start = true;
      } else if (!std::isspace(static_cast<unsigned char>(src[i]))) {
        line_start = false;
      }
    }
  }
  return out;
}

namespace {

const std::set<std::string>& forbidden_identifiers() {
  static const std::set<std::string> words{
      "new",        "delete",      "malloc",     "calloc",     "realloc",
      "free",       "alloca",      "vector",     "string",     "make_unique",
      "make_shared", "unique_ptr", "shared_ptr", "function",   "map",
      "list",       "deque",       "allocator"};
  return words;
}

// [begin, end) of the project_soc function body, or npos.
std::pair<std::size_t, std::size_t> soc_body(const std::string& code) {
  const std::size_t name = code.find("void project_soc(");
  if (name == std::string::npos) return {std::string::npos, std::string::npos};
  const std::size_t open = code.find('{', name);
  const std::size_t semi = code.find(';', name);
  if (open == std::string::npos || semi < open) return {std::string::npos, std::string::npos};
  int depth = 0;
  for (std::size_t i = open; i < code.size(); ++i) {
    if (code[i] == '{') ++depth;
    if (code[i] == '}' && --depth == 0) return {open, i + 1};
  }
  return {open, code.size()};
}

}  // namespace

std::vector<AuditFinding> audit_source(const std::string& file, const std::string& source) {
  const std::string code = strip_non_code(source);
  const auto [soc_begin, soc_end] = soc_body(code);
  std::vector<AuditFinding> findings;
  int line = 1;
  std::size_t i = 0;
  while (i < code.size()) {
    const char ch = code[i];
    if (ch == '\n') {
      ++line;
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < code.size() &&
             (std::isalnum(static_cast<unsigned char>(code[j])) || code[j] == '_')) {
        ++j;
      }
      std::string word = code.substr(i, j - i);
      if (forbidden_identifiers().count(word)) findings.push_back({file, line, word});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(ch))) {
      // Skip numeric literals whole so hex floats are not read as identifiers.
      while (i < code.size() &&
             (std::isalnum(static_cast<unsigned char>(code[i])) || code[i] == '.' ||
              ((code[i] == '+' || code[i] == '-') && (code[i - 1] == 'p' || code[i - 1] == 'e' ||
                                                       code[i - 1] == 'P' || code[i - 1] == 'E')))) {
        ++i;
      }
    } else {
      if (ch == '/' && !(soc_begin != std::string::npos && i >= soc_begin && i < soc_end)) {
        findings.push_back({file, line, "/"});
      }
      ++i;
    }
  }
  return findings;
}

std::vector<AuditFinding> audit_tree(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".cpp" || ext == ".hpp")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<AuditFinding> findings;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    auto found = audit_source(std::filesystem::relative(path, root).generic_string(), buf.str());
    findings.insert(findings.end(), found.begin(), found.end());
  }
  return findings;
}

}  // namespace tinysocp::codegen
