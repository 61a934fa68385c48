#pragma once

#include "tinysocp/problem.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace tinysocp {

inline constexpr const char* kProblemSchema = "tinysocp-problem-v1";

/// Malformed problem text. key() is the dotted path of the offending entry,
/// e.g. "dynamics.A".
class ProblemFileError : public std::runtime_error {
 public:
  ProblemFileError(std::string key, const std::string& detail)
      : std::runtime_error(key + ": " + detail), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Parses the "tinysocp-problem-v1" JSON layout. Matrices are row-major
/// nested arrays; bounds accept "inf" / "-inf". Structural problems throw
/// ProblemFileError; the result is not validated.
ProblemDefinition parse_problem(const std::string& text);
ProblemDefinition load_problem(const std::filesystem::path& path);

std::string dump_problem(const ProblemDefinition& problem);

/// Reads a matrix stored as comma-separated rows, one knot per row, and
/// returns it transposed so knots are columns. Blank lines and lines starting
/// with '#' are skipped.
Matrix load_knot_table(const std::filesystem::path& path, int expected_rows, int width);

/// Writes text to path through a sibling temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace tinysocp
