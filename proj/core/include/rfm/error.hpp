#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfm {

enum class ErrorCode {
  invalid_input,
  singular_factor,
  cap_exceeded,
  unsupported_decomposition,
  configuration,
  invalid_problem,
  cfl_violation,
  coverage,
  dimension_mismatch,
  degenerate_test_set,
  degenerate_subdomain,
  divergence,
  unsupported_topology,
  io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; the code identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::singular_factor: return "singular factor";
    case ErrorCode::cap_exceeded: return "size cap exceeded";
    case ErrorCode::unsupported_decomposition: return "unsupported decomposition";
    case ErrorCode::configuration: return "configuration error";
    case ErrorCode::invalid_problem: return "invalid problem";
    case ErrorCode::cfl_violation: return "CFL violation";
    case ErrorCode::coverage: return "coverage error";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::degenerate_test_set: return "degenerate test set";
    case ErrorCode::degenerate_subdomain: return "degenerate subdomain";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::unsupported_topology: return "unsupported topology";
    case ErrorCode::io: return "I/O error";
  }
  return "unknown error";
}

}  // namespace rfm
