#pragma once

#include <stdexcept>
#include <string>

namespace evseg {

enum class ErrorCode {
  MalformedRecord,
  OutOfBounds,
  EmptyFile,
  IoFailure,
  InvalidInterval,
  LengthMismatch,
  ZeroTimespan,
  BadWindow,
  GeometryMismatch,
  EmptyPacket,
  DegenerateCorrelation,
  SpecInvalid,
  DivisionUndefined,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

/// Exception carrying one of the library's error categories.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evseg
