#include "csa/error.hpp"

namespace csa {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::structural: return "structural";
    case ErrorKind::empty_selection: return "empty-selection";
    case ErrorKind::parse: return "parse";
    case ErrorKind::duplicate: return "duplicate";
    case ErrorKind::completeness: return "completeness";
    case ErrorKind::vocabulary: return "vocabulary";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::argument: return "argument";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::zero_variance: return "zero-variance";
    case ErrorKind::symmetry: return "symmetry";
    case ErrorKind::rank_deficient: return "rank-deficient";
    case ErrorKind::degenerate_extent: return "degenerate-extent";
    case ErrorKind::coincident_location: return "coincident-location";
    case ErrorKind::empty_weights: return "empty-weights";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::argument:
      return 2;
    case ErrorKind::structural:
    case ErrorKind::empty_selection:
    case ErrorKind::parse:
    case ErrorKind::duplicate:
    case ErrorKind::completeness:
    case ErrorKind::vocabulary:
    case ErrorKind::insufficient_data:
      return 3;
    default:
      return 4;
  }
}

}  // namespace csa
