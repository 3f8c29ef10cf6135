#pragma once

#include <stdexcept>
#include <string>

namespace geoseg {

enum class Err {
  BearingOutOfFov,
  ProjectionSingularity,
  PixelOutOfDomain,
  ParseError,
  InvalidParameter,
  DegenerateInput,
  PoleSingularity,
  NearestOutOfFov,
  EmptyImage,
  ImageTooSmall,
  SliceOutsideImage,
  LineThroughOrigin,
  DegenerateGeometry,
  DegenerateLine,
  PointAtCameraCenter,
  NonConvergence,
  SingularNormalEquations,
  RotationTooLarge,
  IoError,
};

const char* err_name(Err e);

/// Domain error carrying a typed code; the CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const { return code_; }

private:
  Err code_;
};

[[noreturn]] inline void raise(Err code, const std::string& what) { throw Error(code, what); }

}  // namespace geoseg
