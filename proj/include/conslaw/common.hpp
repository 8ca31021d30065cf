#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace conslaw {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Point = Eigen::Vector2d;

enum class ErrorCode {
  OutOfDomain,
  BadAxis,
  NonEulerSystem,
  DegeneratePolygon,
  MeshFailure,
  SelfIntersecting,
  TooShort,
  UnknownTag,
  MissingBoundaryData,
  MissingTraces,
  NewtonDiverged,
  LeftDomain,
  InvalidSchedule,
  SingularGram,
  NoInadmissibility,
  OutOfStrip,
  NotOnBoundary,
  NoRoot,
  Config,
  MeshMismatch,
};

const char* error_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace conslaw
