#include "shellflow/errors.hpp"

namespace shellflow {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Degeneracy: return "degeneracy";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Projection: return "projection";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Decomposition: return "decomposition";
    case ErrorKind::MeshTangling: return "mesh-tangling";
    case ErrorKind::GraphViolation: return "graph-violation";
    case ErrorKind::LinearSolver: return "linear-solver";
    case ErrorKind::PicardDivergence: return "picard-divergence";
    case ErrorKind::PicardNoContraction: return "picard-no-contraction";
    case ErrorKind::BallExceeded: return "ball-exceeded";
  }
  return "unknown";
}

}  // namespace shellflow
