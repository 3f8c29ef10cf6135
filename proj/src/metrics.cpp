#include "geoseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace geoseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double endpoint_to_circle(const CameraModel& model, const Bearing& endpoint,
                          const GreatCircle& circle) {
  return pixel_to_curve_distance(model, model.project(endpoint), circle);
}

}  // namespace

double d_orth(const CameraModel& model, const GeodesicSegment& s1, const GeodesicSegment& s2) {
  if (segment_overlap(s1, s2) < 0.5) return kInf;
  try {
    double da1 = 0.5 * (endpoint_to_circle(model, s1.p_start, s2.circle) +
                        endpoint_to_circle(model, s1.p_end, s2.circle));
    double da2 = 0.5 * (endpoint_to_circle(model, s2.p_start, s1.circle) +
                        endpoint_to_circle(model, s2.p_end, s1.circle));
    return 0.5 * (da1 + da2);
  } catch (const Error&) {
    return kInf;
  }
}

double d_orth(const CameraModel& model, const CurveSegment& s1, const CurveSegment& s2) {
  return d_orth(model, s1.geo, s2.geo);
}

double d_struct(const CameraModel& model, const GeodesicSegment& s1, const GeodesicSegment& s2) {
  try {
    PixelPoint a1 = model.project(s1.p_start), a2 = model.project(s1.p_end);
    PixelPoint b1 = model.project(s2.p_start), b2 = model.project(s2.p_end);
    double same = 0.5 * (model.pixel_distance(a1, b1) + model.pixel_distance(a2, b2));
    double swapped = 0.5 * (model.pixel_distance(a1, b2) + model.pixel_distance(a2, b1));
    return std::min(same, swapped);
  } catch (const Error&) {
    return kInf;
  }
}

double d_struct(const CameraModel& model, const CurveSegment& s1, const CurveSegment& s2) {
  return d_struct(model, s1.geo, s2.geo);
}

GeodesicSegment transport_segment(const GeodesicSegment& s, const Eigen::Matrix3d& rotation) {
  return {GreatCircle{(rotation * s.circle.k).normalized()}, (rotation * s.p_start).normalized(),
          (rotation * s.p_end).normalized()};
}

RotatedPair make_rotated_pair(const GrayImage& img, const CameraModel& model,
                              const Eigen::Matrix3d& rotation) {
  if (img.empty()) raise(Err::EmptyImage, "cannot warp an empty image");
  double angle = std::acos(clamp_unit(0.5 * (rotation.trace() - 1.0)));
  const bool limited =
      model.kind() == CameraKind::UnifiedMei || model.kind() == CameraKind::Scaramuzza;
  if (limited && angle > deg2rad(60.0) + 1e-12)
    raise(Err::RotationTooLarge, "fisheye/PAL pairs are limited to 60 degree rotations");

  RotatedPair out;
  out.rotation = rotation;
  out.image = GrayImage(img.width, img.height);
  const Eigen::Matrix3d r_inv = rotation.transpose();
  const bool wrap = model.wraps_horizontal();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      uint8_t value = 0;
      try {
        Bearing b = model.unproject(PixelPoint(x, y));
        Bearing src = (r_inv * b).normalized();
        PixelPoint sp = model.project(src);  // BearingOutOfFov -> masked
        bool on_img = wrap || (sp.x() >= -0.5 && sp.x() <= img.width - 0.5);
        on_img = on_img && sp.y() >= -0.5 && sp.y() <= img.height - 0.5;
        if (on_img) {
          double v = bilinear_sample(img, sp.x(), sp.y(), wrap);
          value = static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
        }
      } catch (const Error&) {
        value = 0;
      }
      out.image.at(x, y) = value;
    }
  }
  return out;
}

namespace {

struct DirectionalMatch {
  int matched = 0;
  int visible = 0;
  std::vector<double> distances;
};

/// Transport each source segment into the target frame, keep those with at
/// least half their arc inside the band, and match greedily one-to-one.
DirectionalMatch match_direction(const std::vector<GeodesicSegment>& src,
                                 const std::vector<GeodesicSegment>& dst,
                                 const Eigen::Matrix3d& rotation, const CameraModel& model,
                                 double eps_px, SegmentMetric metric) {
  DirectionalMatch result;
  std::vector<GeodesicSegment> transported;
  for (const auto& s : src) {
    GeodesicSegment t = transport_segment(s, rotation);
    if (band_visible_fraction(t, model.fov_min_deg(), model.fov_max_deg()) >= 0.5)
      transported.push_back(t);
  }
  result.visible = static_cast<int>(transported.size());
  if (transported.empty() || dst.empty()) return result;

  std::vector<std::tuple<double, int, int>> candidates;
  for (size_t i = 0; i < transported.size(); ++i) {
    for (size_t j = 0; j < dst.size(); ++j) {
      double d = metric == SegmentMetric::Orth ? d_orth(model, transported[i], dst[j])
                                               : d_struct(model, transported[i], dst[j]);
      if (d <= eps_px) candidates.emplace_back(d, static_cast<int>(i), static_cast<int>(j));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<char> used_src(transported.size(), 0), used_dst(dst.size(), 0);
  for (auto [d, i, j] : candidates) {
    if (used_src[i] || used_dst[j]) continue;
    used_src[i] = used_dst[j] = 1;
    ++result.matched;
    result.distances.push_back(d);
  }
  return result;
}

}  // namespace

PairResult evaluate_pair(const std::vector<GeodesicSegment>& dets_a,
                         const std::vector<GeodesicSegment>& dets_b,
                         const Eigen::Matrix3d& rotation, const CameraModel& model, double eps_px,
                         SegmentMetric metric) {
  if (!(eps_px > 0.0)) raise(Err::InvalidParameter, "eps_px must be positive");
  PairResult out;
  out.metric = metric;
  out.eps_px = eps_px;
  out.n_detected_a = static_cast<int>(dets_a.size());
  out.n_detected_b = static_cast<int>(dets_b.size());

  DirectionalMatch ab = match_direction(dets_a, dets_b, rotation, model, eps_px, metric);
  DirectionalMatch ba =
      match_direction(dets_b, dets_a, rotation.transpose(), model, eps_px, metric);

  double rep_a = ab.visible > 0 ? double(ab.matched) / ab.visible : 0.0;
  double rep_b = ba.visible > 0 ? double(ba.matched) / ba.visible : 0.0;
  out.rep = 0.5 * (rep_a + rep_b);
  out.empty_side = ab.visible == 0 || ba.visible == 0;

  std::vector<double> pooled = ab.distances;
  pooled.insert(pooled.end(), ba.distances.begin(), ba.distances.end());
  if (!pooled.empty()) {
    double sum = 0.0;
    for (double d : pooled) sum += d;
    out.le = sum / pooled.size();
  }
  return out;
}

PairResult evaluate_pair(const std::vector<CurveSegment>& dets_a,
                         const std::vector<CurveSegment>& dets_b, const Eigen::Matrix3d& rotation,
                         const CameraModel& model, double eps_px, SegmentMetric metric) {
  std::vector<GeodesicSegment> ga, gb;
  ga.reserve(dets_a.size());
  gb.reserve(dets_b.size());
  for (const auto& s : dets_a) ga.push_back(s.geo);
  for (const auto& s : dets_b) gb.push_back(s.geo);
  return evaluate_pair(ga, gb, rotation, model, eps_px, metric);
}

double repeatability(const std::vector<GeodesicSegment>& dets_a,
                     const std::vector<GeodesicSegment>& dets_b, const Eigen::Matrix3d& rotation,
                     const CameraModel& model, double eps_px, SegmentMetric metric) {
  return evaluate_pair(dets_a, dets_b, rotation, model, eps_px, metric).rep;
}

std::optional<double> localization_error(const std::vector<GeodesicSegment>& dets_a,
                                         const std::vector<GeodesicSegment>& dets_b,
                                         const Eigen::Matrix3d& rotation,
                                         const CameraModel& model, double eps_px,
                                         SegmentMetric metric) {
  return evaluate_pair(dets_a, dets_b, rotation, model, eps_px, metric).le;
}

}  // namespace geoseg
