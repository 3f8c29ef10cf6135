#include "geoseg/errors.hpp"

namespace geoseg {

const char* err_name(Err e) {
  switch (e) {
    case Err::BearingOutOfFov: return "BearingOutOfFov";
    case Err::ProjectionSingularity: return "ProjectionSingularity";
    case Err::PixelOutOfDomain: return "PixelOutOfDomain";
    case Err::ParseError: return "ParseError";
    case Err::InvalidParameter: return "InvalidParameter";
    case Err::DegenerateInput: return "DegenerateInput";
    case Err::PoleSingularity: return "PoleSingularity";
    case Err::NearestOutOfFov: return "NearestOutOfFov";
    case Err::EmptyImage: return "EmptyImage";
    case Err::ImageTooSmall: return "ImageTooSmall";
    case Err::SliceOutsideImage: return "SliceOutsideImage";
    case Err::LineThroughOrigin: return "LineThroughOrigin";
    case Err::DegenerateGeometry: return "DegenerateGeometry";
    case Err::DegenerateLine: return "DegenerateLine";
    case Err::PointAtCameraCenter: return "PointAtCameraCenter";
    case Err::NonConvergence: return "NonConvergence";
    case Err::SingularNormalEquations: return "SingularNormalEquations";
    case Err::RotationTooLarge: return "RotationTooLarge";
    case Err::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace geoseg
