#include "geoseg/sphere.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace geoseg {

FitResult fit_great_circle(std::span<const Bearing> points) {
  const int n = static_cast<int>(points.size());
  if (n < 2) raise(Err::DegenerateInput, "need at least 2 points");
  Eigen::MatrixXd a(n, 3);
  for (int i = 0; i < n; ++i) a.row(i) = points[i].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(1) <= 1e-8 * std::max(1.0, s(0)))
    raise(Err::DegenerateInput, "points span a single direction");
  FitResult out;
  out.circle.k = svd.matrixV().col(2).normalized();  // guard accumulated rounding
  out.rms_angular_residual = s(2) / std::sqrt(double(n));
  out.n_points = n;
  return out;
}

Bearing nearest_on_circle(const Bearing& b, const GreatCircle& c) {
  Eigen::Vector3d cross = b.cross(c.k);
  double norm = cross.norm();
  if (norm <= 1e-9) raise(Err::PoleSingularity, "bearing parallel to the circle normal");
  return c.k.cross(cross / norm);
}

double pixel_to_curve_distance(const CameraModel& model, const PixelPoint& p,
                               const GreatCircle& c) {
  Bearing b = model.unproject(p);
  Bearing nearest = nearest_on_circle(b, c);
  if (!model.in_fov(nearest))
    raise(Err::NearestOutOfFov, "closest circle point outside the FoV band");
  PixelPoint q;
  try {
    q = model.project(nearest);
  } catch (const Error&) {
    raise(Err::NearestOutOfFov, "closest circle point not projectable");
  }
  return model.pixel_distance(q, p);
}

double arc_length(const GeodesicSegment& s) {
  return std::acos(clamp_unit(s.p_start.dot(s.p_end)));
}

namespace {

/// Frame (u, w, k) with p(phi) = u cos(phi) + w sin(phi), p(0) = p_start and
/// p(arc) = p_end; the span of phi is (0, pi) by the shorter-arc invariant.
struct ArcFrame {
  Eigen::Vector3d u, w, k;
  double arc;
};

ArcFrame arc_frame(const GeodesicSegment& s) {
  ArcFrame f;
  f.arc = arc_length(s);
  f.u = s.p_start.normalized();
  Eigen::Vector3d k = s.circle.k.normalized();
  Eigen::Vector3d w = k.cross(f.u);
  if (w.dot(s.p_end) < 0.0) {  // orient so the rotation runs start -> end
    k = -k;
    w = -w;
  }
  f.k = k;
  f.w = w;
  return f;
}

double wrap_2pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

/// Length of the intersection of circular intervals [0, la] and
/// [start, start + lb] (angles mod 2pi, lengths <= 2pi).
double circular_overlap(double la, double start, double lb) {
  start = wrap_2pi(start);
  double total = 0.0;
  for (double s0 : {start, start - 2.0 * kPi}) {
    double lo = std::max(0.0, s0);
    double hi = std::min(la, s0 + lb);
    if (hi > lo) total += hi - lo;
  }
  return total;
}

}  // namespace

std::vector<GeodesicSegment> slice_segment(const GeodesicSegment& s, double m_deg) {
  if (!(m_deg > 0.0)) raise(Err::InvalidParameter, "m_deg must be positive");
  const double m = deg2rad(m_deg);
  ArcFrame f = arc_frame(s);
  int n = static_cast<int>(std::ceil(f.arc / m - 1e-12));
  n = std::max(n, 1);
  auto at = [&](double phi) -> Bearing {
    return (f.u * std::cos(phi) + f.w * std::sin(phi)).normalized();
  };
  std::vector<GeodesicSegment> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double a = i * m;
    double b = std::min(f.arc, (i + 1) * m);
    out.push_back({s.circle, i == 0 ? s.p_start : at(a), i == n - 1 ? s.p_end : at(b)});
  }
  return out;
}

double segment_overlap(const GeodesicSegment& s1, const GeodesicSegment& s2) {
  double tilt = angle_between(s1.circle.k, s2.circle.k);
  tilt = std::min(tilt, kPi - tilt);
  if (tilt >= deg2rad(45.0)) return 0.0;

  // One direction: project arc a onto b's circle (b's arc occupies [0, fb.arc]
  // in its own frame), intersect, normalize by b's length. Of the two arcs
  // between the projected endpoints, the one holding the projected midpoint is
  // the image of a.
  auto ratio = [&](const GeodesicSegment& a, const GeodesicSegment& b) -> double {
    ArcFrame fb = arc_frame(b);
    auto angle_on_b = [&](const Bearing& p) -> double {
      Bearing q = nearest_on_circle(p, b.circle);
      return wrap_2pi(std::atan2(q.dot(fb.w), q.dot(fb.u)));
    };
    ArcFrame fa = arc_frame(a);
    double a0 = angle_on_b(a.p_start);
    double a1 = angle_on_b(a.p_end);
    Bearing amid = fa.u * std::cos(0.5 * fa.arc) + fa.w * std::sin(0.5 * fa.arc);
    double mid = angle_on_b(amid);
    double fwd = wrap_2pi(a1 - a0);
    double start, len;
    if (wrap_2pi(mid - a0) <= fwd + 1e-12) {
      start = a0;
      len = fwd;
    } else {
      start = a1;
      len = 2.0 * kPi - fwd;
    }
    return circular_overlap(fb.arc, start, len) / fb.arc;
  };
  try {
    return std::clamp(std::min(ratio(s1, s2), ratio(s2, s1)), 0.0, 1.0);
  } catch (const Error&) {
    return 0.0;  // projection hit a pole; arcs this tilted do not overlap
  }
}

std::vector<std::pair<double, double>> band_intervals(const GeodesicSegment& s,
                                                      double fov_min_deg, double fov_max_deg) {
  ArcFrame f = arc_frame(s);
  // z(phi) = A cos(phi - phi0)
  double c1 = f.u.z(), c2 = f.w.z();
  double amp = std::hypot(c1, c2);
  double phi0 = (amp > 0.0) ? std::atan2(c2, c1) : 0.0;
  double z_lo = std::cos(deg2rad(fov_max_deg));
  double z_hi = std::cos(deg2rad(fov_min_deg));

  std::vector<double> cuts{0.0, f.arc};
  auto add_crossings = [&](double zb) {
    if (amp <= 0.0 || std::abs(zb) > amp) return;
    double d = std::acos(clamp_unit(zb / amp));
    for (double base : {phi0 + d, phi0 - d}) {
      for (int k = -2; k <= 2; ++k) {
        double phi = base + 2.0 * kPi * k;
        if (phi > 1e-12 && phi < f.arc - 1e-12) cuts.push_back(phi);
      }
    }
  };
  add_crossings(z_lo);
  add_crossings(z_hi);
  std::sort(cuts.begin(), cuts.end());

  std::vector<std::pair<double, double>> out;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    if (b - a <= 1e-12) continue;
    double zm = amp * std::cos(0.5 * (a + b) - phi0);
    if (zm >= z_lo - 1e-12 && zm <= z_hi + 1e-12) {
      if (!out.empty() && a - out.back().second <= 1e-12)
        out.back().second = b;
      else
        out.emplace_back(a, b);
    }
  }
  return out;
}

double band_visible_fraction(const GeodesicSegment& s, double fov_min_deg, double fov_max_deg) {
  double arc = arc_length(s);
  if (arc <= 0.0) return 0.0;
  double vis = 0.0;
  for (auto [a, b] : band_intervals(s, fov_min_deg, fov_max_deg)) vis += b - a;
  return std::clamp(vis / arc, 0.0, 1.0);
}

}  // namespace geoseg
