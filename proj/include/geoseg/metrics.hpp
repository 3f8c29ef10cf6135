#pragma once

#include <optional>
#include <vector>

#include "geoseg/camera.hpp"
#include "geoseg/detector.hpp"
#include "geoseg/image.hpp"
#include "geoseg/sphere.hpp"

namespace geoseg {

/// Orthogonal distance of two curve segments in pixels: the mean of the four
/// endpoint-to-other-circle distances, halved symmetrically. Pairs whose arc
/// overlap is below 0.5 (and pairs hitting geometry errors) map to +infinity.
double d_orth(const CameraModel& model, const GeodesicSegment& s1, const GeodesicSegment& s2);
double d_orth(const CameraModel& model, const CurveSegment& s1, const CurveSegment& s2);

/// Structural distance: min over the two endpoint pairings of the mean
/// endpoint pixel distance.
double d_struct(const CameraModel& model, const GeodesicSegment& s1, const GeodesicSegment& s2);
double d_struct(const CameraModel& model, const CurveSegment& s1, const CurveSegment& s2);

struct RotatedPair {
  GrayImage image;            // img2(p) = img(project(R^-1 unproject(p)))
  Eigen::Matrix3d rotation;   // transports frame-1 bearings: b2 = R b1
};

/// Bilinear warp of img under a pure camera rotation; pixels whose pre-image
/// leaves the FoV become 0. Fisheye/PAL-style models (MEI, Scaramuzza) reject
/// rotations above 60 degrees (RotationTooLarge).
RotatedPair make_rotated_pair(const GrayImage& img, const CameraModel& model,
                              const Eigen::Matrix3d& rotation);

/// Segment transported by a frame rotation.
GeodesicSegment transport_segment(const GeodesicSegment& s, const Eigen::Matrix3d& rotation);

enum class SegmentMetric { Orth, Struct };

struct PairResult {
  double rep = 0.0;                 // repeatability in [0, 1]
  std::optional<double> le;         // localization error (px), absent w/o matches
  int n_detected_a = 0;
  int n_detected_b = 0;
  SegmentMetric metric = SegmentMetric::Orth;
  double eps_px = 5.0;
  bool empty_side = false;          // one side had no (visible) detections
};

/// Symmetric repeatability / localization-error protocol: segments of one
/// frame are transported into the other, greedily matched one-to-one under
/// the chosen metric within eps_px, and the two directional ratios are
/// averaged. Only segments whose transported arc keeps at least half of its
/// length inside the FoV band enter the denominators.
PairResult evaluate_pair(const std::vector<GeodesicSegment>& dets_a,
                         const std::vector<GeodesicSegment>& dets_b,
                         const Eigen::Matrix3d& rotation, const CameraModel& model, double eps_px,
                         SegmentMetric metric);

PairResult evaluate_pair(const std::vector<CurveSegment>& dets_a,
                         const std::vector<CurveSegment>& dets_b, const Eigen::Matrix3d& rotation,
                         const CameraModel& model, double eps_px, SegmentMetric metric);

double repeatability(const std::vector<GeodesicSegment>& dets_a,
                     const std::vector<GeodesicSegment>& dets_b, const Eigen::Matrix3d& rotation,
                     const CameraModel& model, double eps_px, SegmentMetric metric);

std::optional<double> localization_error(const std::vector<GeodesicSegment>& dets_a,
                                         const std::vector<GeodesicSegment>& dets_b,
                                         const Eigen::Matrix3d& rotation,
                                         const CameraModel& model, double eps_px,
                                         SegmentMetric metric);

}  // namespace geoseg
