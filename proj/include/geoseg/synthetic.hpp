#pragma once

#include <vector>

#include "geoseg/camera.hpp"
#include "geoseg/image.hpp"
#include "geoseg/lines.hpp"
#include "geoseg/sphere.hpp"

namespace geoseg {

/// Random 3D wireframe: world-frame line segments inside an axis-aligned box.
struct Scene {
  struct Segment3d {
    Eigen::Vector3d a;
    Eigen::Vector3d b;
  };
  std::vector<Segment3d> segments;
  uint64_t seed = 0;
  Eigen::Vector3d bounds_min{-4, -4, -4};
  Eigen::Vector3d bounds_max{4, 4, 4};
};

/// Deterministic scene from a seed: segment midpoints uniform in the box,
/// directions uniform on the sphere, lengths uniform in [0.5, 3] scene units;
/// segments are redrawn until both endpoints land inside the box.
Scene gen_scene(uint64_t seed, int n_lines, const Eigen::Vector3d& bounds_min = {-4, -4, -4},
                const Eigen::Vector3d& bounds_max = {4, 4, 4});

struct RenderStyle {
  double line_intensity = 220.0;
  double background = 30.0;
  double stroke_width = 2.0;   // px
  double noise_sigma = 0.0;    // additive Gaussian, per pixel
  uint64_t noise_seed = 1;
};

/// One ground-truth geodesic arc; source_id indexes scene.segments (FoV
/// clipping may split one 3D segment into several arcs).
struct GtSegment {
  int source_id = 0;
  GeodesicSegment geo;
};

struct RenderOutput {
  GrayImage image;
  std::vector<GtSegment> gt;
  std::vector<GreatCircle> gt_circles;  // parallel to gt
};

/// Renders the wireframe through the camera model with anti-aliased strokes,
/// masking pixels outside the FoV band to 0. Ground truth is computed
/// analytically: camera-frame endpoint bearings, circle normal = normalized
/// cross product, clipped to the band; arcs shorter than 30 px of image arc
/// are dropped from the GT list.
RenderOutput render(const Scene& scene, const Pose& camera_pose, const CameraModel& model,
                    int width, int height, const RenderStyle& style = {});

}  // namespace geoseg
