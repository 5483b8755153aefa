#include "lutdla/error.hpp"

namespace lutdla {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Corruption: return "corruption";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Deadlock: return "deadlock";
    case ErrorKind::Infeasible: return "infeasible";
  }
  return "unknown";
}

}  // namespace lutdla
