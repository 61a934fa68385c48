#include "tinysocp/codegen.hpp"
#include "tinysocp/problem.hpp"
#include "tinysocp/problem_io.hpp"
#include "tinysocp/riccati.hpp"
#include "tinysocp/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <optional>
#include <string>

namespace py = pybind11;
using namespace tinysocp;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using InputArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Module-lifetime exception types, deliberately leaked.
py::handle g_validation_error;
py::handle g_problem_file_error;
py::handle g_lifecycle_error;
py::handle g_codegen_error;

void set_error(py::handle type, const std::string& message, const char* attr,
               const std::string& value) {
  py::object instance = type(message);
  instance.attr(attr) = value;
  PyErr_SetObject(type.ptr(), instance.ptr());
}

Matrix to_matrix(const py::handle& value, const char* name, int rows, int cols) {
  const InputArray a = InputArray::ensure(value);
  if (!a) throw py::type_error(std::string(name) + ": expected an array of floats");
  const bool vector_like = cols == 1 && a.ndim() == 1;
  if (!vector_like && a.ndim() != 2) {
    throw py::value_error(std::string(name) + ": expected a 2-D array");
  }
  const py::ssize_t r = a.shape(0);
  const py::ssize_t c = vector_like ? 1 : a.shape(1);
  if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols)) {
    throw py::value_error(std::string(name) + ": expected shape (" + std::to_string(rows) + ", " +
                          std::to_string(cols) + "), got (" + std::to_string(r) + ", " +
                          std::to_string(c) + ")");
  }
  return Eigen::Map<const RowMatrix>(a.data(), r, c);
}

Vector to_vector(const py::handle& value, const char* name, int size) {
  const InputArray a = InputArray::ensure(value);
  if (!a || a.ndim() != 1) throw py::value_error(std::string(name) + ": expected a 1-D array");
  if (size >= 0 && a.shape(0) != size) {
    throw py::value_error(std::string(name) + ": expected length " + std::to_string(size));
  }
  return Eigen::Map<const Vector>(a.data(), a.shape(0));
}

std::optional<Bounds> bounds_of(const py::dict& bounds, const char* lo, const char* hi, int size) {
  const bool has_lo = bounds.contains(lo);
  const bool has_hi = bounds.contains(hi);
  if (!has_lo && !has_hi) return std::nullopt;
  Bounds b{Vector::Constant(size, -kInf), Vector::Constant(size, kInf)};
  if (has_lo) b.lower = to_vector(bounds[lo], lo, size);
  if (has_hi) b.upper = to_vector(bounds[hi], hi, size);
  return b;
}

std::vector<ConeSlice> cones_of(const py::dict& socs, const char* key) {
  std::vector<ConeSlice> out;
  if (!socs.contains(key)) return out;
  for (const py::handle item : socs[key]) {
    const auto pair = item.cast<std::pair<int, int>>();
    out.push_back({pair.first, pair.second});
  }
  return out;
}

template <typename Field>
void set_if(const py::dict& d, const char* key, Field& field) {
  if (d.contains(key)) field = d[key].cast<Field>();
}

Settings settings_of(const py::dict& d) {
  static const char* const known[] = {"rho", "abs_pri_tol", "abs_dua_tol", "max_iter",
                                      "check_termination", "en_state_bound", "en_input_bound",
                                      "en_state_soc", "en_input_soc"};
  for (const auto& item : d) {
    const auto key = item.first.cast<std::string>();
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw py::key_error("settings: unknown key '" + key + "'");
    }
  }
  Settings s;
  set_if(d, "rho", s.rho);
  set_if(d, "abs_pri_tol", s.abs_pri_tol);
  set_if(d, "abs_dua_tol", s.abs_dua_tol);
  set_if(d, "max_iter", s.max_iter);
  set_if(d, "check_termination", s.check_termination);
  set_if(d, "en_state_bound", s.en_state_bound);
  set_if(d, "en_input_bound", s.en_input_bound);
  set_if(d, "en_state_soc", s.en_state_soc);
  set_if(d, "en_input_soc", s.en_input_soc);
  return s;
}

// Knot-per-row numpy array of a stage-major buffer.
py::array_t<double> knot_rows(const std::vector<double>& buf, int knots, int width) {
  py::array_t<double> out({knots, width});
  std::copy(buf.begin(), buf.end(), out.mutable_data());
  return out;
}

class Handle {
 public:
  void setup(int N, const py::handle& A, const py::handle& B, const py::handle& c,
             const py::handle& Q, const py::handle& R, const py::dict& bounds,
             const py::dict& socs, const py::dict& settings) {
    ProblemDefinition def;
    def.dynamics.A = to_matrix(A, "A", -1, -1);
    const int n = static_cast<int>(def.dynamics.A.rows());
    def.dynamics.B = to_matrix(B, "B", n, -1);
    const int m = static_cast<int>(def.dynamics.B.cols());
    def.dims = {n, m, N};
    def.dynamics.c = c.is_none() ? Vector::Zero(n) : to_vector(c, "c", n);
    def.cost.Q = to_matrix(Q, "Q", n, n);
    def.cost.R = to_matrix(R, "R", m, m);
    def.constraints.state_bounds = bounds_of(bounds, "x_min", "x_max", n);
    def.constraints.input_bounds = bounds_of(bounds, "u_min", "u_max", m);
    def.constraints.state_cones = cones_of(socs, "state");
    def.constraints.input_cones = cones_of(socs, "input");
    def.settings = settings_of(settings);
    install(def);
  }

  void setup_file(const std::filesystem::path& path) { install(load_problem(path)); }

  void set_x0(const py::handle& x0) {
    Solver<double>& s = solver();
    x0_ = to_vector(x0, "x0", s.dims().n);
    s.set_x0({x0_.data(), static_cast<std::size_t>(x0_.size())});
  }

  void set_xref(const py::handle& xref) {
    Solver<double>& s = solver();
    refs_->x_ref = to_matrix(xref, "xref", s.dims().N, s.dims().n).transpose();
    s.set_x_ref(refs_->x_ref);
  }

  void set_uref(const py::handle& uref) {
    Solver<double>& s = solver();
    refs_->u_ref = to_matrix(uref, "uref", s.dims().N - 1, s.dims().m).transpose();
    s.set_u_ref(refs_->u_ref);
  }

  py::dict solve() {
    Solver<double>& s = solver();
    const SolveReport<double>* report = nullptr;
    {
      py::gil_scoped_release release;
      report = &s.solve();
    }
    py::dict out;
    out["status"] = std::string(to_string(report->status));
    out["iterations"] = report->iterations;
    out["pri_res"] = report->pri_res;
    out["dua_res"] = report->dua_res;
    return out;
  }

  py::object get_u(bool full) {
    const Solver<double>& s = solver();
    const ProblemDims& d = s.dims();
    if (full) return knot_rows(s.report().u_traj, d.N - 1, d.m);
    const auto u = s.first_input();
    return py::array_t<double>(static_cast<py::ssize_t>(u.size()), u.data());
  }

  py::array_t<double> get_x() {
    const Solver<double>& s = solver();
    return knot_rows(s.report().x_traj, s.dims().N, s.dims().n);
  }

  void warm_start_shift() { solver().warm_start_shift(); }
  void reset() { solver().reset(); }

  std::string codegen(const std::filesystem::path& output_dir, const std::string& precision,
                      std::optional<std::size_t> flash_budget) {
    solver();
    codegen::GenerateOptions options;
    options.precision = codegen::parse_precision(precision);
    options.flash_budget = flash_budget;
    options.x0 = x0_;
    options.references = refs_;
    return codegen::generate(*problem_, *cache_, output_dir, options).manifest;
  }

  bool is_setup() const { return solver_.has_value(); }

 private:
  void install(const ProblemDefinition& def) {
    ValidatedProblem problem = validate(def);
    SolverCache cache = make_cache(problem);
    solver_.reset();
    problem_.emplace(std::move(problem));
    cache_.emplace(std::move(cache));
    solver_.emplace(*problem_, *cache_);
    x0_ = Vector::Zero(problem_->dims().n);
    refs_ = References::zero(problem_->dims());
  }

  Solver<double>& solver() {
    if (!solver_) {
      set_error(g_lifecycle_error, "setup() must be called before this operation", "name",
                "NotSetUp");
      throw py::error_already_set();
    }
    return *solver_;
  }
  const Solver<double>& solver() const { return const_cast<Handle*>(this)->solver(); }

  std::optional<ValidatedProblem> problem_;
  std::optional<SolverCache> cache_;
  std::optional<Solver<double>> solver_;
  Vector x0_;
  std::optional<References> refs_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the tinysocp package";

  g_validation_error =
      py::exception<ValidationError>(m, "ValidationError", PyExc_ValueError).release();
  g_problem_file_error =
      py::exception<ProblemFileError>(m, "ProblemFileError", PyExc_ValueError).release();
  g_lifecycle_error = py::exception<void>(m, "LifecycleError", PyExc_RuntimeError).release();
  g_codegen_error = py::exception<void>(m, "CodegenError", PyExc_RuntimeError).release();

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      set_error(g_validation_error, e.what(), "name", std::string(to_string(e.code())));
    } catch (const ProblemFileError& e) {
      set_error(g_problem_file_error, e.what(), "key", e.key());
    } catch (const codegen::UnsupportedDimensions& e) {
      set_error(g_codegen_error, e.what(), "name", "UnsupportedDimensions");
    } catch (const codegen::IoError& e) {
      set_error(g_codegen_error, e.what(), "name", "IoError");
    }
  });

  py::class_<Handle>(m, "Handle")
      .def(py::init<>())
      .def("setup", &Handle::setup, py::arg("N"), py::arg("A"), py::arg("B"), py::arg("c"),
           py::arg("Q"), py::arg("R"), py::arg("bounds"), py::arg("socs"), py::arg("settings"))
      .def("setup_file", &Handle::setup_file, py::arg("path"))
      .def("set_x0", &Handle::set_x0, py::arg("x0"))
      .def("set_xref", &Handle::set_xref, py::arg("xref"))
      .def("set_uref", &Handle::set_uref, py::arg("uref"))
      .def("solve", &Handle::solve)
      .def("get_u", &Handle::get_u, py::arg("full") = false)
      .def("get_x", &Handle::get_x)
      .def("warm_start_shift", &Handle::warm_start_shift)
      .def("reset", &Handle::reset)
      .def("codegen", &Handle::codegen, py::arg("output_dir"), py::arg("precision") = "f32",
           py::arg("flash_budget") = py::none())
      .def_property_readonly("is_setup", &Handle::is_setup);
}
