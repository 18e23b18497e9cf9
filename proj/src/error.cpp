#include "evseg/error.hpp"

namespace evseg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidInterval: return "InvalidInterval";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroTimespan: return "ZeroTimespan";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::EmptyPacket: return "EmptyPacket";
    case ErrorCode::DegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::DivisionUndefined: return "DivisionUndefined";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace evseg
