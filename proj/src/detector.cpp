#include "geoseg/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace geoseg {

void DetectorParams::validate() const {
  if (t_anchor <= 0 || t_gradient_min <= 0 || t_fit_px <= 0.0 || t_outliers <= 0 ||
      min_fit_len <= 0 || min_segment_len_px <= 0 || refit_interval <= 0 ||
      anchor_scan_stride <= 0 || gaussian_sigma <= 0.0 || band_margin_deg < 0.0 ||
      dedup_dist_px < 0.0)
    raise(Err::InvalidParameter, "detector parameters must be positive");
  if (min_fit_len >= min_segment_len_px)
    raise(Err::InvalidParameter, "min_fit_len must be below min_segment_len_px");
}

namespace {

GrayImage equalize_hist(const GrayImage& img) {
  size_t hist[256] = {0};
  for (uint8_t v : img.data) ++hist[v];
  int occupied = 0;
  for (size_t h : hist)
    if (h) ++occupied;
  if (occupied <= 1) return img;  // single-bin histogram maps to itself
  const size_t total = img.data.size();
  uint8_t lut[256];
  size_t cdf = 0;
  for (int v = 0; v < 256; ++v) {
    cdf += hist[v];
    lut[v] = static_cast<uint8_t>((cdf * 255) / total);
  }
  GrayImage out(img.width, img.height);
  for (size_t i = 0; i < total; ++i) out.data[i] = lut[img.data[i]];
  return out;
}

GrayImage gaussian5(const GrayImage& img, double sigma, bool wrap_x) {
  double w[5];
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    w[i] = std::exp(-0.5 * (i - 2) * (i - 2) / (sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;

  const int width = img.width, height = img.height;
  auto clamp_or_wrap_x = [&](int x) {
    if (wrap_x) {
      x %= width;
      return x < 0 ? x + width : x;
    }
    return std::clamp(x, 0, width - 1);
  };
  std::vector<double> tmp(size_t(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += w[i + 2] * img.at(clamp_or_wrap_x(x + i), y);
      tmp[size_t(y) * width + x] = acc;
    }
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += w[i + 2] * tmp[size_t(std::clamp(y + i, 0, height - 1)) * width + x];
      out.at(x, y) = static_cast<uint8_t>(std::clamp(std::lround(acc), 0l, 255l));
    }
  return out;
}

}  // namespace

GrayImage preprocess(const GrayImage& img, const DetectorParams& params) {
  if (img.empty()) raise(Err::EmptyImage, "preprocess needs a non-empty image");
  return gaussian5(equalize_hist(img), params.gaussian_sigma, false);
}

GradientMap gradients(const GrayImage& img, const DetectorParams& params, bool wrap_x) {
  if (img.width < 3 || img.height < 3) raise(Err::ImageTooSmall, "Sobel needs at least 3x3");
  GradientMap gm;
  gm.width = img.width;
  gm.height = img.height;
  gm.magnitude.assign(size_t(img.width) * img.height, 0);
  gm.orientation.assign(size_t(img.width) * img.height, 0);

  const int w = img.width, h = img.height;
  auto px = [&](int x, int y) -> int {
    if (wrap_x) {
      x %= w;
      if (x < 0) x += w;
    }
    return img.at(x, y);
  };
  const int x_lo = wrap_x ? 0 : 1;
  const int x_hi = wrap_x ? w : w - 1;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      int gx = -px(x - 1, y - 1) + px(x + 1, y - 1) - 2 * px(x - 1, y) + 2 * px(x + 1, y) -
               px(x - 1, y + 1) + px(x + 1, y + 1);
      int gy = -px(x - 1, y - 1) - 2 * px(x, y - 1) - px(x + 1, y - 1) + px(x - 1, y + 1) +
               2 * px(x, y + 1) + px(x + 1, y + 1);
      int mag = std::abs(gx) + std::abs(gy);
      size_t i = size_t(y) * w + x;
      gm.magnitude[i] = mag < params.t_gradient_min ? 0 : static_cast<uint16_t>(mag);
      gm.orientation[i] = std::abs(gx) >= std::abs(gy) ? 1 : 0;
    }
  }
  return gm;
}

std::vector<Eigen::Vector2i> extract_anchors(const GradientMap& gm, const DetectorParams& params) {
  std::vector<Eigen::Vector2i> anchors;
  const int w = gm.width, h = gm.height;
  for (int y = 0; y < h; y += params.anchor_scan_stride) {
    for (int x = 0; x < w; ++x) {
      int m = gm.mag(x, y);
      if (m == 0) continue;
      bool is_anchor;
      if (gm.orient(x, y)) {  // vertical edge: compare across x
        if (x == 0 || x == w - 1) continue;
        is_anchor = m - gm.mag(x - 1, y) >= params.t_anchor && m - gm.mag(x + 1, y) >= params.t_anchor;
      } else {  // horizontal edge: compare across y
        if (y == 0 || y == h - 1) continue;
        is_anchor = m - gm.mag(x, y - 1) >= params.t_anchor && m - gm.mag(x, y + 1) >= params.t_anchor;
      }
      if (is_anchor) anchors.emplace_back(x, y);
    }
  }
  return anchors;
}

namespace {

enum class Dir { Left, Right, Up, Down };

struct Walker {
  const GradientMap& gm;
  const CameraModel& model;
  const DetectorParams& params;
  const bool wrap;
  std::vector<uint8_t> visited;
  std::vector<int8_t> valid_memo;  // -1 unknown, 0 invalid, 1 valid

  Walker(const GradientMap& g, const CameraModel& m, const DetectorParams& p)
      : gm(g), model(m), params(p), wrap(m.wraps_horizontal()),
        visited(size_t(g.width) * g.height, 0), valid_memo(size_t(g.width) * g.height, -1) {}

  int wrap_x(int x) const {
    if (!wrap) return x;
    x %= gm.width;
    return x < 0 ? x + gm.width : x;
  }

  bool in_bounds(int x, int y) const { return x >= 0 && x < gm.width && y >= 0 && y < gm.height; }

  bool pixel_valid(int x, int y) {
    size_t i = size_t(y) * gm.width + x;
    if (valid_memo[i] < 0) {
      bool ok;
      try {
        // The walk stays band_margin_deg inside the FoV band, which keeps it
        // off the intensity step that masking paints along the band boundary.
        double polar = polar_angle_deg(model.unproject(PixelPoint(x, y)));
        ok = polar >= model.fov_min_deg() + params.band_margin_deg &&
             polar <= model.fov_max_deg() - params.band_margin_deg;
      } catch (const Error&) {
        ok = false;
      }
      valid_memo[i] = ok ? 1 : 0;
    }
    return valid_memo[i] == 1;
  }

  /// Magnitude as seen by the walk: 0 outside bounds, on consumed pixels and
  /// on pixels the model cannot unproject.
  int mag_at(int x, int y) {
    x = wrap_x(x);
    if (!in_bounds(x, y)) return 0;
    size_t i = size_t(y) * gm.width + x;
    if (visited[i]) return 0;
    int m = gm.magnitude[i];
    if (m == 0) return 0;
    return pixel_valid(x, y) ? m : 0;
  }

  /// Magnitude ignoring consumption; nonzero on pixels owned by another chain.
  int raw_mag_at(int x, int y) {
    x = wrap_x(x);
    if (!in_bounds(x, y)) return 0;
    int m = gm.magnitude[size_t(y) * gm.width + x];
    if (m == 0) return 0;
    return pixel_valid(x, y) ? m : 0;
  }

  void mark(int x, int y) { visited[size_t(y) * gm.width + x] = 1; }

  /// Consumes the cross-edge neighbors of a chained pixel so the soft
  /// shoulders of a wide gradient ridge cannot spawn parallel duplicate
  /// chains (lateral non-maximum consumption).
  void mark_lateral(int x, int y) {
    auto mark_if_in = [&](int mx, int my) {
      mx = wrap_x(mx);
      if (in_bounds(mx, my)) mark(mx, my);
    };
    if (gm.orient(x, y)) {  // vertical edge: suppress across x
      mark_if_in(x - 1, y);
      mark_if_in(x + 1, y);
    } else {
      mark_if_in(x, y - 1);
      mark_if_in(x, y + 1);
    }
  }

  /// Forward candidates per Fig.-5-style growth: three neighbors ahead of the
  /// move direction, straight continuation listed first so ties stay straight.
  std::array<Eigen::Vector2i, 3> candidates(const Eigen::Vector2i& c, Dir d) const {
    switch (d) {
      case Dir::Left:
        return {Eigen::Vector2i(c.x() - 1, c.y()), Eigen::Vector2i(c.x() - 1, c.y() - 1),
                Eigen::Vector2i(c.x() - 1, c.y() + 1)};
      case Dir::Right:
        return {Eigen::Vector2i(c.x() + 1, c.y()), Eigen::Vector2i(c.x() + 1, c.y() - 1),
                Eigen::Vector2i(c.x() + 1, c.y() + 1)};
      case Dir::Up:
        return {Eigen::Vector2i(c.x(), c.y() - 1), Eigen::Vector2i(c.x() - 1, c.y() - 1),
                Eigen::Vector2i(c.x() + 1, c.y() - 1)};
      default:
        return {Eigen::Vector2i(c.x(), c.y() + 1), Eigen::Vector2i(c.x() - 1, c.y() + 1),
                Eigen::Vector2i(c.x() + 1, c.y() + 1)};
    }
  }

  Dir adapt_direction(const Eigen::Vector2i& from, const Eigen::Vector2i& to, Dir d) {
    int x = to.x(), y = to.y();
    bool vertical_edge = gm.orient(x, y) != 0;
    if (vertical_edge) {
      if (d == Dir::Up || d == Dir::Down) return d;
      int dy = to.y() - from.y();
      if (dy < 0) return Dir::Up;
      if (dy > 0) return Dir::Down;
      return mag_at(x, y - 1) >= mag_at(x, y + 1) ? Dir::Up : Dir::Down;
    }
    if (d == Dir::Left || d == Dir::Right) return d;
    int dx = to.x() - from.x();
    if (wrap && std::abs(dx) > 1) dx = -dx;  // stepped across the seam
    if (dx < 0) return Dir::Left;
    if (dx > 0) return Dir::Right;
    return mag_at(x - 1, y) >= mag_at(x + 1, y) ? Dir::Left : Dir::Right;
  }

  /// Follows the gradient ridge from start (excluded) in direction d,
  /// consuming pixels until the chain dies out. When the whole forward cone
  /// is owned by earlier chains (a crossing), the walk passes through without
  /// claiming those pixels, for at most t_outliers consecutive steps.
  std::vector<Eigen::Vector2i> trace(const Eigen::Vector2i& start, Dir d) {
    std::vector<Eigen::Vector2i> chain;
    Eigen::Vector2i cur = start;
    int passthrough = 0;
    size_t steps = 0;
    const size_t step_guard = size_t(gm.width) * gm.height;
    while (++steps < step_guard) {
      auto cands = candidates(cur, d);
      int best = -1, best_mag = 0;
      for (int i = 0; i < 3; ++i) {
        int m = mag_at(cands[i].x(), cands[i].y());
        if (m > best_mag) {
          best_mag = m;
          best = i;
        }
      }
      bool owned = false;
      if (best < 0) {
        if (passthrough >= params.t_outliers) break;
        for (int i = 0; i < 3; ++i) {
          int m = raw_mag_at(cands[i].x(), cands[i].y());
          if (m > best_mag) {
            best_mag = m;
            best = i;
          }
        }
        if (best < 0) break;
        owned = true;
      }
      Eigen::Vector2i next(wrap_x(cands[best].x()), cands[best].y());
      Dir nd = adapt_direction(cur, next, d);
      if (owned) {
        ++passthrough;
      } else {
        passthrough = 0;
        mark(next.x(), next.y());
        mark_lateral(next.x(), next.y());
        chain.push_back(next);
      }
      cur = next;
      d = nd;
    }
    return chain;
  }
};

struct SegmentBuilder {
  const CameraModel& model;
  const DetectorParams& params;
  std::vector<CurveSegment>& out;

  double chain_distance(const Eigen::Vector2i& px, const GreatCircle& circle) const {
    try {
      return pixel_to_curve_distance(model, PixelPoint(px.x(), px.y()), circle);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  void emit(const std::vector<Eigen::Vector2i>& chain, const std::vector<Bearing>& bearings,
            const std::vector<int>& accepted, GreatCircle circle) const {
    if (static_cast<int>(accepted.size()) < params.min_segment_len_px) return;
    std::vector<Bearing> pts;
    pts.reserve(accepted.size());
    for (int i : accepted) pts.push_back(bearings[i]);
    try {
      circle = fit_great_circle(pts).circle;
    } catch (const Error&) {
      // fall back to the running fit
    }
    double sum = 0.0;
    for (int i : accepted) {
      double d = chain_distance(chain[i], circle);
      if (!std::isfinite(d)) return;
      sum += d;
    }
    double avg = sum / accepted.size();
    if (avg > params.t_fit_px) return;
    Bearing b_s, b_e;
    try {
      b_s = nearest_on_circle(bearings[accepted.front()], circle);
      b_e = nearest_on_circle(bearings[accepted.back()], circle);
    } catch (const Error&) {
      return;
    }
    CurveSegment seg;
    seg.chain.reserve(accepted.size());
    for (int i : accepted) seg.chain.push_back(chain[i]);
    seg.geo = GeodesicSegment{circle, b_s, b_e};
    seg.avg_fit_px = avg;
    out.push_back(std::move(seg));
  }

  /// Partitions one traced chain into geodesic segments: slide a min_fit_len
  /// window until it fits, then grow while pixels stay within t_fit_px,
  /// restarting from the break point after t_outliers consecutive misses.
  void build(const std::vector<Eigen::Vector2i>& chain, const std::vector<Bearing>& bearings) {
    const int n = static_cast<int>(chain.size());
    int lo = 0;
    while (n - lo >= params.min_fit_len) {
      const int hi = lo + params.min_fit_len;
      GreatCircle circle;
      try {
        circle = fit_great_circle(std::span<const Bearing>(bearings.data() + lo,
                                                           params.min_fit_len))
                     .circle;
      } catch (const Error&) {
        ++lo;
        continue;
      }
      double sum = 0.0;
      bool usable = true;
      for (int i = lo; i < hi; ++i) {
        double d = chain_distance(chain[i], circle);
        if (!std::isfinite(d)) {
          usable = false;
          break;
        }
        sum += d;
      }
      if (!usable || sum / params.min_fit_len > params.t_fit_px) {
        ++lo;
        continue;
      }

      std::vector<int> accepted;
      accepted.reserve(64);
      for (int i = lo; i < hi; ++i) accepted.push_back(i);
      const Bearing first = bearings[lo];
      int outlier_run = 0, since_refit = 0;
      int j = hi;
      bool emitted = false;
      while (j < n) {
        if (angle_between(first, bearings[j]) >= kPi / 2.0) {
          // shorter-arc guard: close here, next segment starts at j
          emit(chain, bearings, accepted, circle);
          lo = j;
          emitted = true;
          break;
        }
        double d = chain_distance(chain[j], circle);
        if (d <= params.t_fit_px) {
          accepted.push_back(j);
          outlier_run = 0;
          if (++since_refit >= params.refit_interval) {
            std::vector<Bearing> pts;
            pts.reserve(accepted.size());
            for (int i : accepted) pts.push_back(bearings[i]);
            try {
              circle = fit_great_circle(pts).circle;
            } catch (const Error&) {
            }
            since_refit = 0;
          }
        } else if (++outlier_run > params.t_outliers) {
          emit(chain, bearings, accepted, circle);
          lo = j - outlier_run + 1;  // restart from the first miss of the run
          emitted = true;
          break;
        }
        ++j;
      }
      if (!emitted) {
        emit(chain, bearings, accepted, circle);
        lo = n;
      }
    }
  }
};

double wrap_angle_2pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  return a < 0.0 ? a + 2.0 * kPi : a;
}

/// Chains split at stroke crossings leave two collinear segments with a small
/// arc gap between them. Re-join such pairs: same circle within 1.5 degrees,
/// mutual endpoint-to-circle distance under 2.5 px, arcs essentially disjoint
/// with a gap below 3 degrees.
void link_collinear(std::vector<CurveSegment>& segments, const CameraModel& model,
                    const DetectorParams& params) {
  auto raw_distance = [&](const GeodesicSegment& a, const GeodesicSegment& b) -> double {
    try {
      return 0.25 * (pixel_to_curve_distance(model, model.project(a.p_start), b.circle) +
                     pixel_to_curve_distance(model, model.project(a.p_end), b.circle) +
                     pixel_to_curve_distance(model, model.project(b.p_start), a.circle) +
                     pixel_to_curve_distance(model, model.project(b.p_end), a.circle));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Rebuilds a merged segment from the union of two chains; returns false
  // when the merge would violate the fit or shorter-arc invariants.
  auto try_merge = [&](CurveSegment& a, const CurveSegment& b) -> bool {
    std::vector<Eigen::Vector2i> chain = a.chain;
    chain.insert(chain.end(), b.chain.begin(), b.chain.end());
    std::vector<Bearing> bearings;
    bearings.reserve(chain.size());
    for (const auto& px : chain) {
      try {
        bearings.push_back(model.unproject(PixelPoint(px.x(), px.y())));
      } catch (const Error&) {
        return false;
      }
    }
    GreatCircle circle;
    try {
      circle = fit_great_circle(bearings).circle;
    } catch (const Error&) {
      return false;
    }
    // order along the circle and check the joint fit
    Eigen::Vector3d u;
    try {
      u = nearest_on_circle(bearings.front(), circle);
    } catch (const Error&) {
      return false;
    }
    Eigen::Vector3d w = circle.k.normalized().cross(u);
    std::vector<std::pair<double, int>> keyed(bearings.size());
    double lo = 0.0, hi = 0.0;
    for (size_t i = 0; i < bearings.size(); ++i) {
      double ang = std::atan2(bearings[i].dot(w), bearings[i].dot(u));
      keyed[i] = {ang, static_cast<int>(i)};
      lo = std::min(lo, ang);
      hi = std::max(hi, ang);
    }
    if (hi - lo >= kPi * 0.95) return false;  // keep the shorter-arc invariant
    std::sort(keyed.begin(), keyed.end());
    double sum = 0.0;
    for (const auto& px : chain) {
      double d;
      try {
        d = pixel_to_curve_distance(model, PixelPoint(px.x(), px.y()), circle);
      } catch (const Error&) {
        return false;
      }
      sum += d;
    }
    double avg = sum / chain.size();
    if (avg > params.t_fit_px) return false;
    Bearing b_s, b_e;
    try {
      b_s = nearest_on_circle(bearings[keyed.front().second], circle);
      b_e = nearest_on_circle(bearings[keyed.back().second], circle);
    } catch (const Error&) {
      return false;
    }
    CurveSegment merged;
    merged.chain.reserve(chain.size());
    for (const auto& [ang, i] : keyed) merged.chain.push_back(chain[i]);
    merged.geo = GeodesicSegment{circle, b_s, b_e};
    merged.avg_fit_px = avg;
    a = std::move(merged);
    return true;
  };

  bool changed = true;
  int guard = 0;
  while (changed && ++guard < 64) {
    changed = false;
    for (size_t i = 0; i < segments.size() && !changed; ++i) {
      for (size_t j = i + 1; j < segments.size(); ++j) {
        const GeodesicSegment &ga = segments[i].geo, &gb = segments[j].geo;
        double tilt = angle_between(ga.circle.k, gb.circle.k);
        tilt = std::min(tilt, kPi - tilt);
        if (tilt > deg2rad(1.5)) continue;
        if (raw_distance(ga, gb) > 2.5) continue;
        // arc relationship on a's circle
        Eigen::Vector3d u, w;
        double b0, b1;
        try {
          u = nearest_on_circle(ga.p_start, ga.circle);
          w = ga.circle.k.normalized().cross(u);
          if (w.dot(nearest_on_circle(ga.p_end, ga.circle)) < 0.0) w = -w;
          b0 = wrap_angle_2pi(std::atan2(nearest_on_circle(gb.p_start, ga.circle).dot(w),
                                         nearest_on_circle(gb.p_start, ga.circle).dot(u)));
          b1 = wrap_angle_2pi(std::atan2(nearest_on_circle(gb.p_end, ga.circle).dot(w),
                                         nearest_on_circle(gb.p_end, ga.circle).dot(u)));
        } catch (const Error&) {
          continue;
        }
        double arc_a = arc_length(ga), arc_b = arc_length(gb);
        if (arc_a + arc_b > deg2rad(170.0)) continue;
        double s = std::min(b0, b1), e = std::max(b0, b1);
        if (e - s > kPi) {  // interval crosses the wrap point
          s = e;
          e = std::min(b0, b1) + 2.0 * kPi;
        }
        double overlap = std::max(0.0, std::min(arc_a, e) - std::max(0.0, s));
        if (overlap > 0.2 * std::min(arc_a, arc_b)) continue;
        double gap1 = wrap_angle_2pi(s - arc_a);             // end of a -> start of b
        double gap2 = wrap_angle_2pi(-e);                    // end of b -> start of a
        if (std::min(gap1, gap2) > deg2rad(6.0)) continue;
        if (try_merge(segments[i], segments[j])) {
          segments.erase(segments.begin() + j);
          changed = true;
          break;
        }
      }
    }
  }
}

}  // namespace

std::vector<CurveSegment> detect(const GrayImage& img, const CameraModel& model,
                                 const DetectorParams& params) {
  params.validate();
  if (img.empty()) raise(Err::EmptyImage, "detect needs a non-empty image");
  const bool wrap = model.wraps_horizontal();
  GrayImage smoothed = params.equalize ? gaussian5(equalize_hist(img), params.gaussian_sigma, wrap)
                                       : gaussian5(img, params.gaussian_sigma, wrap);
  GradientMap gm = gradients(smoothed, params, wrap);

  auto anchors = extract_anchors(gm, params);
  std::sort(anchors.begin(), anchors.end(), [&](const auto& a, const auto& b) {
    int ma = gm.mag(a.x(), a.y()), mb = gm.mag(b.x(), b.y());
    if (ma != mb) return ma > mb;
    return size_t(a.y()) * gm.width + a.x() < size_t(b.y()) * gm.width + b.x();
  });

  Walker walker(gm, model, params);
  std::vector<CurveSegment> segments;
  SegmentBuilder builder{model, params, segments};

  for (const auto& anchor : anchors) {
    size_t idx = size_t(anchor.y()) * gm.width + anchor.x();
    if (walker.visited[idx]) continue;
    if (!walker.pixel_valid(anchor.x(), anchor.y())) continue;
    walker.mark(anchor.x(), anchor.y());
    walker.mark_lateral(anchor.x(), anchor.y());

    const bool vertical_edge = gm.orient(anchor.x(), anchor.y()) != 0;
    auto side_a = walker.trace(anchor, vertical_edge ? Dir::Up : Dir::Left);
    auto side_b = walker.trace(anchor, vertical_edge ? Dir::Down : Dir::Right);

    std::vector<Eigen::Vector2i> chain;
    chain.reserve(side_a.size() + side_b.size() + 1);
    chain.insert(chain.end(), side_a.rbegin(), side_a.rend());
    chain.push_back(anchor);
    chain.insert(chain.end(), side_b.begin(), side_b.end());
    if (static_cast<int>(chain.size()) < params.min_segment_len_px) continue;

    std::vector<Bearing> bearings;
    bearings.reserve(chain.size());
    bool ok = true;
    for (const auto& px : chain) {
      try {
        bearings.push_back(model.unproject(PixelPoint(px.x(), px.y())));
      } catch (const Error&) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    builder.build(chain, bearings);
  }

  link_collinear(segments, model, params);

  if (params.dedup_dist_px > 0.0 && segments.size() > 1) {
    // A wide stroke carries a gradient flank on each side; the two chains fit
    // near-identical circles. Keep the longer segment of any such pair.
    std::vector<size_t> order(segments.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return segments[a].chain.size() > segments[b].chain.size();
    });
    std::vector<char> drop(segments.size(), 0);
    std::vector<size_t> kept;
    for (size_t idx : order) {
      bool dup = false;
      for (size_t other : kept) {
        double tilt = angle_between(segments[idx].geo.circle.k, segments[other].geo.circle.k);
        tilt = std::min(tilt, kPi - tilt);
        if (tilt > deg2rad(3.0)) continue;
        double d = 0.0;
        try {
          const GeodesicSegment &ga = segments[idx].geo, &gb = segments[other].geo;
          if (segment_overlap(ga, gb) < 0.5) continue;
          d = 0.25 * (pixel_to_curve_distance(model, model.project(ga.p_start), gb.circle) +
                      pixel_to_curve_distance(model, model.project(ga.p_end), gb.circle) +
                      pixel_to_curve_distance(model, model.project(gb.p_start), ga.circle) +
                      pixel_to_curve_distance(model, model.project(gb.p_end), ga.circle));
        } catch (const Error&) {
          continue;
        }
        if (d < params.dedup_dist_px) {
          dup = true;
          break;
        }
      }
      if (dup)
        drop[idx] = 1;
      else
        kept.push_back(idx);
    }
    std::vector<CurveSegment> filtered;
    filtered.reserve(kept.size());
    for (size_t i = 0; i < segments.size(); ++i)
      if (!drop[i]) filtered.push_back(std::move(segments[i]));
    segments = std::move(filtered);
  }
  return segments;
}

}  // namespace geoseg
