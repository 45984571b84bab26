#include "sqz/errors.hpp"

namespace sqz {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::argument: return "argument";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::degenerate_envelope: return "degenerate-envelope";
    case ErrorKind::empty_overlap: return "empty-overlap";
    case ErrorKind::grid_mismatch: return "grid-mismatch";
    case ErrorKind::range: return "range";
    case ErrorKind::unphysical_delay: return "unphysical-delay";
    case ErrorKind::no_fold: return "no-fold";
    case ErrorKind::fit: return "fit";
    case ErrorKind::stream_alignment: return "stream-alignment";
    case ErrorKind::insufficient_statistics: return "insufficient-statistics";
    case ErrorKind::baseline: return "baseline";
    case ErrorKind::unsupported_input: return "unsupported-input";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind), message_(message) {}

}  // namespace sqz
