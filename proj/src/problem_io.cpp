#include "tinysocp/problem_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace tinysocp {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ProblemFileError(path.empty() ? key : path + "." + key, "missing");
  }
  return obj.at(key);
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

double number(const json& value, const std::string& path, bool allow_inf) {
  if (value.is_number()) return value.get<double>();
  if (allow_inf && value.is_string()) {
    const auto text = value.get<std::string>();
    if (text == "inf" || text == "+inf") return kInf;
    if (text == "-inf") return -kInf;
  }
  throw ProblemFileError(path, allow_inf ? "expected a number or \"inf\"/\"-inf\""
                                         : "expected a number");
}

int integer(const json& value, const std::string& path) {
  if (!value.is_number_integer()) throw ProblemFileError(path, "expected an integer");
  return value.get<int>();
}

Vector vector_of(const json& value, const std::string& path, bool allow_inf = false) {
  if (!value.is_array()) throw ProblemFileError(path, "expected an array");
  Vector out(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] =
        number(value[i], path + "[" + std::to_string(i) + "]", allow_inf);
  }
  return out;
}

Matrix matrix_of(const json& value, const std::string& path) {
  if (!value.is_array() || value.empty()) {
    throw ProblemFileError(path, "expected a non-empty array of rows");
  }
  const std::size_t rows = value.size();
  if (!value[0].is_array()) throw ProblemFileError(path, "expected nested row arrays");
  const std::size_t cols = value[0].size();
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    if (!value[i].is_array() || value[i].size() != cols) {
      throw ProblemFileError(row_path, "ragged row");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          number(value[i][j], row_path + "[" + std::to_string(j) + "]", false);
    }
  }
  return out;
}

std::optional<Bounds> bounds_of(const json& cons, const char* lo_key, const char* hi_key,
                                int dim) {
  const bool has_lo = cons.contains(lo_key);
  const bool has_hi = cons.contains(hi_key);
  if (!has_lo && !has_hi) return std::nullopt;
  Bounds b{Vector::Constant(dim, -kInf), Vector::Constant(dim, kInf)};
  if (has_lo) b.lower = vector_of(cons.at(lo_key), join("constraints", lo_key), true);
  if (has_hi) b.upper = vector_of(cons.at(hi_key), join("constraints", hi_key), true);
  return b;
}

std::vector<ConeSlice> cones_of(const json& cons, const char* key) {
  std::vector<ConeSlice> out;
  if (!cons.contains(key)) return out;
  const std::string path = join("constraints", key);
  const json& list = cons.at(key);
  if (!list.is_array()) throw ProblemFileError(path, "expected an array of {start,len}");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string item = path + "[" + std::to_string(i) + "]";
    out.push_back({integer(require(list[i], "start", item), item + ".start"),
                   integer(require(list[i], "len", item), item + ".len")});
  }
  return out;
}

json bound_json(double value) {
  if (value == kInf) return "inf";
  if (value == -kInf) return "-inf";
  return value;
}

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v, bool bounds = false) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(bounds ? bound_json(v[i]) : json(v[i]));
  }
  return out;
}

json cones_json(const std::vector<ConeSlice>& cones) {
  json out = json::array();
  for (const ConeSlice& c : cones) out.push_back({{"start", c.start}, {"len", c.len}});
  return out;
}

}  // namespace

ProblemDefinition parse_problem(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProblemFileError("<document>", e.what());
  }
  if (!root.is_object()) throw ProblemFileError("<document>", "expected an object");
  if (root.contains("schema") &&
      (!root["schema"].is_string() || root["schema"].get<std::string>() != kProblemSchema)) {
    throw ProblemFileError("schema", std::string("expected \"") + kProblemSchema + "\"");
  }

  ProblemDefinition def;
  const json& dims = require(root, "dims", "");
  def.dims.n = integer(require(dims, "n", "dims"), "dims.n");
  def.dims.m = integer(require(dims, "m", "dims"), "dims.m");
  def.dims.N = integer(require(dims, "N", "dims"), "dims.N");

  const json& dyn = require(root, "dynamics", "");
  def.dynamics.A = matrix_of(require(dyn, "A", "dynamics"), "dynamics.A");
  def.dynamics.B = matrix_of(require(dyn, "B", "dynamics"), "dynamics.B");
  def.dynamics.c = dyn.contains("c") ? vector_of(dyn.at("c"), "dynamics.c")
                                     : Vector::Zero(def.dims.n);

  const json& cost = require(root, "cost", "");
  def.cost.Q = matrix_of(require(cost, "Q", "cost"), "cost.Q");
  def.cost.R = matrix_of(require(cost, "R", "cost"), "cost.R");

  if (root.contains("constraints")) {
    const json& cons = root.at("constraints");
    if (!cons.is_object()) throw ProblemFileError("constraints", "expected an object");
    def.constraints.state_bounds = bounds_of(cons, "x_min", "x_max", def.dims.n);
    def.constraints.input_bounds = bounds_of(cons, "u_min", "u_max", def.dims.m);
    def.constraints.state_cones = cones_of(cons, "state_cones");
    def.constraints.input_cones = cones_of(cons, "input_cones");
  }

  if (root.contains("settings")) {
    const json& s = root.at("settings");
    if (!s.is_object()) throw ProblemFileError("settings", "expected an object");
    Settings& out = def.settings;
    if (s.contains("rho")) out.rho = number(s["rho"], "settings.rho", false);
    if (s.contains("abs_pri_tol")) {
      out.abs_pri_tol = number(s["abs_pri_tol"], "settings.abs_pri_tol", false);
    }
    if (s.contains("abs_dua_tol")) {
      out.abs_dua_tol = number(s["abs_dua_tol"], "settings.abs_dua_tol", false);
    }
    if (s.contains("max_iter")) out.max_iter = integer(s["max_iter"], "settings.max_iter");
    if (s.contains("check_termination")) {
      out.check_termination = integer(s["check_termination"], "settings.check_termination");
    }
    for (auto [key, flag] : {std::pair{"en_state_bound", &out.en_state_bound},
                             std::pair{"en_input_bound", &out.en_input_bound},
                             std::pair{"en_state_soc", &out.en_state_soc},
                             std::pair{"en_input_soc", &out.en_input_soc}}) {
      if (!s.contains(key)) continue;
      if (!s[key].is_boolean()) throw ProblemFileError(join("settings", key), "expected a boolean");
      *flag = s[key].get<bool>();
    }
  }
  return def;
}

ProblemDefinition load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProblemFileError("<file>", "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_problem(buffer.str());
}

std::string dump_problem(const ProblemDefinition& p) {
  json root;
  root["schema"] = kProblemSchema;
  root["dims"] = {{"n", p.dims.n}, {"m", p.dims.m}, {"N", p.dims.N}};
  root["dynamics"] = {{"A", matrix_json(p.dynamics.A)},
                      {"B", matrix_json(p.dynamics.B)},
                      {"c", vector_json(p.dynamics.c)}};
  root["cost"] = {{"Q", matrix_json(p.cost.Q)}, {"R", matrix_json(p.cost.R)}};

  json cons = json::object();
  if (p.constraints.state_bounds) {
    cons["x_min"] = vector_json(p.constraints.state_bounds->lower, true);
    cons["x_max"] = vector_json(p.constraints.state_bounds->upper, true);
  }
  if (p.constraints.input_bounds) {
    cons["u_min"] = vector_json(p.constraints.input_bounds->lower, true);
    cons["u_max"] = vector_json(p.constraints.input_bounds->upper, true);
  }
  if (!p.constraints.state_cones.empty()) {
    cons["state_cones"] = cones_json(p.constraints.state_cones);
  }
  if (!p.constraints.input_cones.empty()) {
    cons["input_cones"] = cones_json(p.constraints.input_cones);
  }
  root["constraints"] = cons;

  const Settings& s = p.settings;
  root["settings"] = {{"rho", s.rho},
                      {"abs_pri_tol", s.abs_pri_tol},
                      {"abs_dua_tol", s.abs_dua_tol},
                      {"max_iter", s.max_iter},
                      {"check_termination", s.check_termination},
                      {"en_state_bound", s.en_state_bound},
                      {"en_input_bound", s.en_input_bound},
                      {"en_state_soc", s.en_state_soc},
                      {"en_input_soc", s.en_input_soc}};
  return root.dump(2) + "\n";
}

Matrix load_knot_table(const std::filesystem::path& path, int expected_rows, int width) {
  std::ifstream in(path);
  if (!in) throw ProblemFileError("<file>", "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ProblemFileError(path.filename().string() + ":" + std::to_string(rows.size() + 1),
                               "not a number: '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != width) {
      throw ProblemFileError(path.filename().string() + ":" + std::to_string(rows.size() + 1),
                             "expected " + std::to_string(width) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<int>(rows.size()) != expected_rows) {
    throw ProblemFileError(path.filename().string(),
                           "expected " + std::to_string(expected_rows) + " rows, found " +
                               std::to_string(rows.size()));
  }
  Matrix out(width, expected_rows);
  for (int k = 0; k < expected_rows; ++k) {
    for (int i = 0; i < width; ++i) out(i, k) = rows[k][i];
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tinysocp
