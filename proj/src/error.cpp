#include "gradsurf/error.hpp"

namespace gradsurf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::ZeroCurvature: return "ZeroCurvature";
    case ErrorCode::InactiveNeighbor: return "InactiveNeighbor";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace gradsurf
