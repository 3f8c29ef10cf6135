#pragma once

#include <span>
#include <vector>

#include "geoseg/camera.hpp"
#include "geoseg/types.hpp"

namespace geoseg {

/// Unit normal of the plane through the sphere center. k and -k denote the
/// same circle; every consumer here is sign-agnostic.
struct GreatCircle {
  Eigen::Vector3d k;
};

/// Shorter great-circle arc between two on-circle bearings.
struct GeodesicSegment {
  GreatCircle circle;
  Bearing p_start;
  Bearing p_end;
};

struct FitResult {
  GreatCircle circle;
  double rms_angular_residual = 0.0;
  int n_points = 0;
};

/// Least-squares great circle through unit points: k minimizes sum (p_i . k)^2
/// subject to |k| = 1, taken as the right singular vector of the stacked point
/// matrix with the smallest singular value. Throws DegenerateInput for fewer
/// than 2 points or a rank-deficient stack (all points along one direction).
FitResult fit_great_circle(std::span<const Bearing> points);

/// Closest circle point to b: k x normalize(b x k).
/// Throws PoleSingularity when b is parallel to +-k.
Bearing nearest_on_circle(const Bearing& b, const GreatCircle& c);

/// Pixel distance between p and the projected curve of c:
/// | project(nearest_on_circle(unproject(p), c)) - p |.
/// Throws PixelOutOfDomain, PoleSingularity, NearestOutOfFov.
double pixel_to_curve_distance(const CameraModel& model, const PixelPoint& p,
                               const GreatCircle& c);

/// Arc length in radians, in (0, pi).
double arc_length(const GeodesicSegment& s);

/// Splits s into ceil(arc/m) contiguous sub-arcs; all but the last span
/// exactly m_deg. Endpoints are produced by rotating p_start about k.
std::vector<GeodesicSegment> slice_segment(const GeodesicSegment& s, double m_deg);

/// Symmetric arc-overlap ratio in [0, 1]: min over both directions of
/// |projection of one arc onto the other circle, intersected with the other
/// arc| / |other arc|. Returns 0 when the circle normals are tilted by more
/// than 45 degrees (mod the sign ambiguity).
double segment_overlap(const GeodesicSegment& s1, const GeodesicSegment& s2);

/// Fraction of the arc whose polar angle lies inside [fov_min, fov_max] deg.
/// Used by the rendering and evaluation protocols; exact interval arithmetic
/// on the closed form z(phi) = A cos(phi - phi0).
double band_visible_fraction(const GeodesicSegment& s, double fov_min_deg, double fov_max_deg);

/// Intervals of the rotation angle phi in [0, arc] (measured from p_start
/// toward p_end) where the arc lies inside the polar band.
std::vector<std::pair<double, double>> band_intervals(const GeodesicSegment& s,
                                                      double fov_min_deg, double fov_max_deg);

}  // namespace geoseg
