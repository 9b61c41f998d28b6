#include "lipfit/error.hpp"

namespace lipfit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::InfeasibleData: return "infeasible-data";
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Calibration: return "calibration";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace lipfit
