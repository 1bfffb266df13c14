#pragma once

#include <stdexcept>
#include <string>

namespace csa {

enum class ErrorKind {
  config,
  structural,
  empty_selection,
  parse,
  duplicate,
  completeness,
  vocabulary,
  insufficient_data,
  argument,
  non_finite,
  zero_variance,
  symmetry,
  rank_deficient,
  degenerate_extent,
  coincident_location,
  empty_weights,
};

const char* to_string(ErrorKind kind) noexcept;

// Process exit code for a failure of this kind: 2 config, 3 data, 4 numeric.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace csa
