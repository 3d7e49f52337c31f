#include "lacal/error.hpp"

namespace lacal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_geometry: return "invalid-geometry";
    case ErrorKind::topology: return "topology";
    case ErrorKind::missing_region: return "missing-region";
    case ErrorKind::inverted_element: return "inverted-element";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::unloading_failure: return "unloading-failure";
    case ErrorKind::shape: return "shape";
    case ErrorKind::fit: return "fit";
    case ErrorKind::undefined_score: return "undefined-score";
    case ErrorKind::fold_size: return "fold-size";
    case ErrorKind::empty_space: return "empty-space";
    case ErrorKind::undefined_indices: return "undefined-indices";
    case ErrorKind::empty_nroy: return "empty-nroy";
    case ErrorKind::sparse_region: return "sparse-region";
    case ErrorKind::degenerate_ensemble: return "degenerate-ensemble";
    case ErrorKind::identifiability: return "identifiability";
    case ErrorKind::degenerate_test: return "degenerate-test";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::dependency: return "dependency";
    case ErrorKind::stage_failure: return "stage-failure";
  }
  return "unknown";
}

}  // namespace lacal
