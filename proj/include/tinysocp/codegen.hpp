#pragma once

#include "tinysocp/problem.hpp"
#include "tinysocp/riccati.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tinysocp::codegen {

inline constexpr const char* kGeneratorVersion = "tinysocp-codegen 1";

enum class Precision { F32, F64 };

std::string_view to_string(Precision precision);
/// Accepts "f32" / "f64".
Precision parse_precision(std::string_view text);
std::size_t scalar_bytes(Precision precision);

class UnsupportedDimensions : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Footprint {
  std::size_t data_bytes = 0;
  std::size_t workspace_bytes = 0;
};

/// Closed-form sizes of the emitted arrays:
///   data      = s * (4n^2 + 2m^2 + 2nm + 2n + m + 2n[box_x] + 2m[box_u]) + 8 * cones
///   workspace = s * (8 n N + 8 m (N-1) + n + m)
/// with s the scalar size. Baked settings are compile-time constants and
/// take no storage.
Footprint estimate_footprint(const ValidatedProblem& problem, Precision precision);

struct GenerateOptions {
  Precision precision = Precision::F32;
  /// Advisory flash limit on data_bytes.
  std::optional<std::size_t> flash_budget;
  /// Initial x0 baked into the mutable statics; zero when empty.
  Vector x0;
  /// Initial references; zero when absent.
  std::optional<References> references;
};

/// File name (relative to the output root) -> contents.
using SourceTree = std::map<std::string, std::string>;

struct GeneratedTree {
  std::filesystem::path root;
  std::vector<std::string> files;
  Footprint footprint;
  std::string manifest;
};

/// Pure rendering step, no I/O. Deterministic in its inputs.
SourceTree render(const ValidatedProblem& problem, const SolverCache& cache,
                  const GenerateOptions& options = {});

/// render() plus atomic writes under out_dir.
GeneratedTree generate(const ValidatedProblem& problem, const SolverCache& cache,
                       const std::filesystem::path& out_dir, const GenerateOptions& options = {});

struct AuditFinding {
  std::string file;
  int line = 0;
  std::string token;
};

/// Code with comments, string and character literals, and #include lines
/// blanked out. Line structure is preserved.
std::string strip_non_code(const std::string& source);

/// Dynamic-allocation constructs anywhere, and '/' anywhere outside the body
/// of project_soc.
std::vector<AuditFinding> audit_source(const std::string& file, const std::string& source);
std::vector<AuditFinding> audit_tree(const std::filesystem::path& root);

}  // namespace tinysocp::codegen
