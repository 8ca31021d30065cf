#include "conslaw/common.hpp"

namespace conslaw {

const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::BadAxis: return "BadAxis";
    case ErrorCode::NonEulerSystem: return "NonEulerSystem";
    case ErrorCode::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::MeshFailure: return "MeshFailure";
    case ErrorCode::SelfIntersecting: return "SelfIntersecting";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::MissingBoundaryData: return "MissingBoundaryData";
    case ErrorCode::MissingTraces: return "MissingTraces";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::LeftDomain: return "LeftDomain";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::NoInadmissibility: return "NoInadmissibility";
    case ErrorCode::OutOfStrip: return "OutOfStrip";
    case ErrorCode::NotOnBoundary: return "NotOnBoundary";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::Config: return "Config";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
  }
  return "Error";
}

}  // namespace conslaw
