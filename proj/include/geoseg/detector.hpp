#pragma once

#include <vector>

#include "geoseg/camera.hpp"
#include "geoseg/image.hpp"
#include "geoseg/sphere.hpp"

namespace geoseg {

/// L1 Sobel magnitude and the quantized edge orientation per pixel.
/// orientation: 1 = vertical edge (|Gx| >= |Gy|, chain grows up/down),
/// 0 = horizontal edge (chain grows left/right).
struct GradientMap {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> magnitude;
  std::vector<uint8_t> orientation;

  uint16_t mag(int x, int y) const { return magnitude[size_t(y) * width + x]; }
  uint8_t orient(int x, int y) const { return orientation[size_t(y) * width + x]; }
};

struct DetectorParams {
  int t_anchor = 8;             // anchor must beat cross-edge neighbors by this
  int t_gradient_min = 36;      // magnitudes below are zeroed (non-edge)
  double t_fit_px = 1.5;        // max pixel-to-curve distance to extend a segment
  int t_outliers = 3;           // consecutive off-curve pixels tolerated
  int min_fit_len = 15;         // pixels before the first circle fit
  int min_segment_len_px = 30;  // shorter chains are discarded
  int refit_interval = 8;       // accepted pixels between full refits
  int anchor_scan_stride = 2;   // row stride of the anchor scan
  double gaussian_sigma = 1.0;  // 5x5 smoothing kernel
  bool equalize = false;        // run histogram equalization before smoothing
  double band_margin_deg = 0.5; // walk validity shrinks the FoV band by this
  double dedup_dist_px = 3.0;   // drop near-duplicate segments; 0 disables

  void validate() const;
};

/// Image-domain pixel chain together with its fitted geodesic segment.
/// Invariants: chain length >= min_segment_len_px, avg_fit_px <= t_fit_px,
/// geo endpoints are the unprojected chain extremes snapped onto the circle.
struct CurveSegment {
  std::vector<Eigen::Vector2i> chain;
  GeodesicSegment geo;
  double avg_fit_px = 0.0;
};

/// Global 256-bin histogram equalization followed by 5x5 Gaussian smoothing
/// (border clamped). A single-bin histogram maps to itself.
GrayImage preprocess(const GrayImage& img, const DetectorParams& params);

/// 3x3 Sobel, L1 magnitude, orientation flag, t_gradient_min floor applied.
/// wrap_x computes the border columns with horizontal wrap (panoramas).
GradientMap gradients(const GrayImage& img, const DetectorParams& params, bool wrap_x = false);

/// Scans every anchor_scan_stride-th row; a pixel is an anchor when its
/// magnitude is nonzero and beats both cross-edge neighbors by t_anchor.
std::vector<Eigen::Vector2i> extract_anchors(const GradientMap& gm, const DetectorParams& params);

/// Omnidirectional curve segment detection: anchors strongest-first, the
/// three-neighbor edge walk, and incremental great-circle fitting on the unit
/// sphere. Pixels that do not unproject under the model behave as zero
/// gradient. Deterministic for identical inputs.
std::vector<CurveSegment> detect(const GrayImage& img, const CameraModel& model,
                                 const DetectorParams& params = {});

}  // namespace geoseg
