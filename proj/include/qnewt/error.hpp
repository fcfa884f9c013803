#pragma once

#include <stdexcept>
#include <string>

namespace qnewt {

/// Reason codes carried by qnewt::Error. Checkers that can report a defect in
/// their result type do so; these codes are for conditions that make the
/// requested computation itself meaningless (bad arguments, exhausted data).
enum class ErrorCode {
  empty_set,          ///< a set operand contained no points
  invalid_radii,      ///< radius list not strictly decreasing / not positive
  insufficient_data,  ///< fewer entries than the analysis needs
  infinite_constant,  ///< ratio against a zero distance with distinct images
  norm_unbounded,     ///< no finite operator-norm bound exists for the instance
  dimension_error,    ///< mismatched output dimensions in an algebra operation
  empty_selection,    ///< a differential returned no selections at the point
  inverse_missing,    ///< the chosen selection carries no quasi-inverse
  out_of_range,       ///< index or parameter outside its admissible range
  invalid_point,      ///< point does not belong to the space (bad node/coord)
  sampling_error,     ///< sampler could not produce usable points
  b_unbounded,        ///< distance/|H| ratio has a zero denominator on a distinct pair
  invalid_majorant,   ///< majorant family preconditions violated
  io_error,           ///< file could not be read or written
  config_error,       ///< malformed experiment configuration
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::empty_set: return "empty_set";
    case ErrorCode::invalid_radii: return "invalid_radii";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::infinite_constant: return "infinite_constant";
    case ErrorCode::norm_unbounded: return "norm_unbounded";
    case ErrorCode::dimension_error: return "dimension_error";
    case ErrorCode::empty_selection: return "empty_selection";
    case ErrorCode::inverse_missing: return "inverse_missing";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::invalid_point: return "invalid_point";
    case ErrorCode::sampling_error: return "sampling_error";
    case ErrorCode::b_unbounded: return "b_unbounded";
    case ErrorCode::invalid_majorant: return "invalid_majorant";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown";
}

/// Exception type used throughout the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qnewt
