#include "blastcast/error.hpp"

namespace blastcast {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kLayoutInfeasible: return "layout_infeasible";
    case ErrorKind::kSourceOccluded: return "source_occluded";
    case ErrorKind::kSolverFailure: return "solver_failure";
    case ErrorKind::kCorruptDataset: return "corrupt_dataset";
    case ErrorKind::kMissingInput: return "missing_input";
    case ErrorKind::kDiverged: return "diverged";
    case ErrorKind::kOutputExists: return "output_exists";
  }
  return "unknown";
}

}  // namespace blastcast
