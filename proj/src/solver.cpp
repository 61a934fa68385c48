#include "tinysocp/solver.hpp"

namespace tinysocp {

std::string_view to_string(TerminationStatus status) {
  switch (status) {
    case TerminationStatus::Unsolved: return "Unsolved";
    case TerminationStatus::Solved: return "Solved";
    case TerminationStatus::MaxIters: return "MaxIters";
  }
  return "Unknown";
}

template struct SolverData<float>;
template struct SolverData<double>;
template struct Workspace<float>;
template struct Workspace<double>;
template class Solver<float>;
template class Solver<double>;

}  // namespace tinysocp
