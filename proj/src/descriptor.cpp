#include "geoseg/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "geoseg/sphere.hpp"

namespace geoseg {

namespace {

constexpr int kBands = 8;
constexpr int kRowsPerBand = 7;
constexpr int kRows = kBands * kRowsPerBand;  // 56 rows across the band region
constexpr int kStatsDim = kBands * 9;         // 72

/// Fixed comparison-pair table; seeded once so descriptors are stable across
/// runs and machines (mt19937 is bit-reproducible by standard). Pairs are
/// drawn within statistic classes (mean, std, energy centroid) so most bits
/// compare commensurable quantities.
struct PairTable {
  std::array<std::pair<uint8_t, uint8_t>, 256> pairs;
  PairTable() {
    // dim layout per band b: [mean(4) std(4) centroid(1)] at 9*b
    std::array<std::vector<uint8_t>, 5> classes;  // mean_perp, mean_l, std_perp, std_l, centroid
    for (int b = 0; b < kBands; ++b) {
      classes[0].push_back(9 * b + 0);
      classes[0].push_back(9 * b + 1);
      classes[1].push_back(9 * b + 2);
      classes[1].push_back(9 * b + 3);
      classes[2].push_back(9 * b + 4);
      classes[2].push_back(9 * b + 5);
      classes[3].push_back(9 * b + 6);
      classes[3].push_back(9 * b + 7);
      classes[4].push_back(9 * b + 8);
    }
    const int quota[5] = {56, 56, 56, 56, 32};
    std::mt19937 rng(0x9E3779B9u);
    int k = 0;
    for (int c = 0; c < 5; ++c) {
      const auto& dims = classes[c];
      for (int q = 0; q < quota[c]; ++q, ++k) {
        uint8_t i = dims[rng() % dims.size()];
        uint8_t j = dims[rng() % dims.size()];
        while (j == i) j = dims[rng() % dims.size()];
        pairs[k] = {i, j};
      }
    }
  }
};

const PairTable& pair_table() {
  static const PairTable table;
  return table;
}

using Stats = Eigen::Matrix<double, kStatsDim, 1>;

/// Stats of the mirrored band region (chord direction reversed): bands
/// reverse, positive/negative gradient sums swap, centroids negate.
Stats flip_stats(const Stats& s) {
  Stats f;
  for (int b = 0; b < kBands; ++b) {
    int src = 9 * (kBands - 1 - b);
    f[9 * b + 0] = s[src + 1];
    f[9 * b + 1] = s[src + 0];
    f[9 * b + 2] = s[src + 3];
    f[9 * b + 3] = s[src + 2];
    f[9 * b + 4] = s[src + 5];
    f[9 * b + 5] = s[src + 4];
    f[9 * b + 6] = s[src + 7];
    f[9 * b + 7] = s[src + 6];
    f[9 * b + 8] = -s[src + 8];
  }
  return f;
}

/// L2-normalizes the mean and std parts so comparisons are invariant to the
/// local gradient-magnitude scale (the warp Jacobian rescales gradients
/// between frames); the centroid part is scale-free already.
Stats normalize_stats(const Stats& s) {
  Stats n = s;
  double mean_sq = 0.0, std_sq = 0.0;
  for (int b = 0; b < kBands; ++b) {
    mean_sq += s.segment<4>(9 * b).squaredNorm();
    std_sq += s.segment<4>(9 * b + 4).squaredNorm();
  }
  double mean_norm = std::sqrt(mean_sq), std_norm = std::sqrt(std_sq);
  for (int b = 0; b < kBands; ++b) {
    if (mean_norm > 1e-9) n.segment<4>(9 * b) /= mean_norm;
    if (std_norm > 1e-9) n.segment<4>(9 * b + 4) /= std_norm;
  }
  return n;
}

std::array<uint64_t, 4> binarize(const Stats& raw) {
  // Comparisons carry a relative-plus-absolute margin so bits stay stable
  // under resampling noise; near-ties resolve to 0 on both sides of a pair.
  Stats stats = normalize_stats(raw);
  std::array<uint64_t, 4> bits{};
  const auto& pairs = pair_table().pairs;
  for (int k = 0; k < 256; ++k) {
    double vi = stats[pairs[k].first], vj = stats[pairs[k].second];
    double floor_abs = pairs[k].first % 9 == 8 ? 0.04 : 0.02;
    double margin = 0.1 * (std::abs(vi) + std::abs(vj)) + floor_abs;
    if (vi > vj + margin) bits[k >> 6] |= 1ull << (k & 63);
  }
  return bits;
}

/// Projected chord of a sub-arc, seam-resolved for wrapping panoramas.
/// Throws SliceOutsideImage when an endpoint leaves the image.
struct ChordFrame {
  PixelPoint p0, p1;
  Eigen::Vector2d d_l;
  double len;
};

ChordFrame chord_frame(const GrayImage& img, const CameraModel& model,
                       const GeodesicSegment& sub) {
  ChordFrame f;
  try {
    f.p0 = model.project(sub.p_start);
    f.p1 = model.project(sub.p_end);
  } catch (const Error&) {
    raise(Err::SliceOutsideImage, "slice endpoint not projectable");
  }
  const bool wrap = model.wraps_horizontal();
  if (wrap && img.width > 0) {
    double dx = f.p1.x() - f.p0.x();
    if (dx > img.width / 2.0) f.p1.x() -= img.width;
    if (dx < -img.width / 2.0) f.p1.x() += img.width;
  }
  auto inside = [&](const PixelPoint& p) {
    bool x_ok = wrap || (p.x() >= -0.5 && p.x() <= img.width - 0.5);
    return x_ok && p.y() >= -0.5 && p.y() <= img.height - 0.5;
  };
  if (!inside(f.p0) || !inside(f.p1))
    raise(Err::SliceOutsideImage, "slice chord leaves the image");
  Eigen::Vector2d chord = f.p1 - f.p0;
  f.len = chord.norm();
  if (f.len < 1.0) raise(Err::SliceOutsideImage, "slice chord degenerate");
  f.d_l = chord / f.len;
  return f;
}

/// Band statistics sampled on the sphere: rows sit at constant angular offset
/// from the arc's great circle (1 px equivalent at the slice midpoint, so the
/// 8 x 7 band region spans the usual 56 px) and run along the arc. On the
/// sphere the neighborhood is rigid under camera rotation, which keeps the
/// statistics stable across rotated omnidirectional frames where a flat image
/// chord band would deform.
Stats band_stats(const GrayImage& img, const CameraModel& model, const GeodesicSegment& sub) {
  const bool wrap = model.wraps_horizontal();
  const double arc = arc_length(sub);
  // p(phi) = u cos phi + w sin phi; psi > 0 rotates toward khat
  Eigen::Vector3d u = sub.p_start.normalized();
  Eigen::Vector3d khat = sub.circle.k.normalized();
  Eigen::Vector3d w = khat.cross(u);
  if (w.dot(sub.p_end) < 0.0) {
    khat = -khat;
    w = -w;
  }
  auto at = [&](double phi, double psi) -> Bearing {
    Eigen::Vector3d base = u * std::cos(phi) + w * std::sin(phi);
    return base * std::cos(psi) + khat * std::sin(psi);
  };
  auto project_ok = [&](const Bearing& b, PixelPoint& px) -> bool {
    try {
      px = model.project(b);
    } catch (const Error&) {
      return false;
    }
    if (!wrap && (px.x() < 0.0 || px.x() > img.width - 1.0)) return false;
    return px.y() >= 0.0 && px.y() <= img.height - 1.0;
  };
  auto pix_delta = [&](const PixelPoint& a, const PixelPoint& b) -> Eigen::Vector2d {
    Eigen::Vector2d d = a - b;
    if (wrap && img.width > 0) {
      if (d.x() > img.width / 2.0) d.x() -= img.width;
      if (d.x() < -img.width / 2.0) d.x() += img.width;
    }
    return d;
  };

  // The angular row spacing is tied to the arc itself (not the local pixel
  // scale, which differs between frames of a rotated pair): the 56-row band
  // region spans one slice arc, i.e. about the chord length in pixels.
  PixelPoint mid_px, mid_dphi;
  const double eps = 1e-4;
  if (!project_ok(at(0.5 * arc, 0.0), mid_px) || !project_ok(at(0.5 * arc + eps, 0.0), mid_dphi))
    raise(Err::SliceOutsideImage, "slice midpoint not projectable");
  double along_scale = pix_delta(mid_dphi, mid_px).norm() / eps;  // px per rad
  if (along_scale < 1e-6) raise(Err::SliceOutsideImage, "degenerate projection scale");
  const double row_step = 2.0 * arc / kRows;
  const int n_steps = std::clamp(static_cast<int>(std::ceil(arc * along_scale)), 8, 160);
  const double dphi = arc / n_steps;

  auto grad = [&](const PixelPoint& p) -> Eigen::Vector2d {
    // +-2 px stencil doubles as a low-pass against resampling noise
    double gx = bilinear_sample(img, p.x() + 2.0, p.y(), wrap) -
                bilinear_sample(img, p.x() - 2.0, p.y(), wrap);
    double gy = bilinear_sample(img, p.x(), p.y() + 2.0, wrap) -
                bilinear_sample(img, p.x(), p.y() - 2.0, wrap);
    return {0.25 * gx, 0.25 * gy};
  };

  const double sigma_g = kRows / 2.0;
  std::array<Eigen::Vector4d, kRows> rows;
  std::array<double, kRows> row_centroid_num{};
  std::array<double, kRows> row_energy{};
  std::array<int, kRows> row_count{};
  rows.fill(Eigen::Vector4d::Zero());

  for (int t = 0; t <= n_steps; ++t) {
    double phi = t * dphi;
    PixelPoint base_px, tangent_px, normal_px;
    if (!project_ok(at(phi, 0.0), base_px)) continue;
    if (!project_ok(at(std::min(phi + eps, arc + eps), 0.0), tangent_px)) continue;
    if (!project_ok(at(phi, eps), normal_px)) continue;
    Eigen::Vector2d d_l = pix_delta(tangent_px, base_px).normalized();
    Eigen::Vector2d d_n = pix_delta(normal_px, base_px).normalized();
    double frac = double(t) / n_steps;
    for (int r = 0; r < kRows; ++r) {
      double offset = r - (kRows - 1) / 2.0;
      double psi = offset * row_step;
      PixelPoint sample;
      if (!project_ok(at(phi, psi), sample)) continue;
      Eigen::Vector2d g = grad(sample);
      double gp = g.dot(d_n), gl = g.dot(d_l);
      // resampling and anti-aliasing noise floor; keeps only real structure
      if (std::abs(gp) + std::abs(gl) < 6.0) gp = gl = 0.0;
      Eigen::Vector4d v(gp >= 0.0 ? gp : 0.0, gp < 0.0 ? -gp : 0.0, gl >= 0.0 ? gl : 0.0,
                        gl < 0.0 ? -gl : 0.0);
      rows[r] += v;
      double e = std::abs(gp) + std::abs(gl);
      row_centroid_num[r] += e * (frac - 0.5);
      row_energy[r] += e;
      ++row_count[r];
    }
  }

  Stats stats;
  for (int b = 0; b < kBands; ++b) {
    Eigen::Matrix<double, 4, kRowsPerBand> band;
    double cnum = 0.0, energy = 0.0;
    for (int r = 0; r < kRowsPerBand; ++r) {
      int row = b * kRowsPerBand + r;
      double offset = row - (kRows - 1) / 2.0;
      double weight = std::exp(-0.5 * offset * offset / (sigma_g * sigma_g));
      band.col(r) = row_count[row] > 0 ? Eigen::Vector4d((weight / row_count[row]) * rows[row])
                                       : Eigen::Vector4d::Zero();
      cnum += weight * row_centroid_num[row];
      energy += weight * row_energy[row];
    }
    Eigen::Vector4d mean = band.rowwise().mean();
    Eigen::Vector4d var = Eigen::Vector4d::Zero();
    for (int r = 0; r < kRowsPerBand; ++r) {
      Eigen::Vector4d d = band.col(r) - mean;
      var += d.cwiseProduct(d);
    }
    var /= kRowsPerBand;
    stats.segment<2>(9 * b + 0) = mean.head<2>();
    stats.segment<2>(9 * b + 2) = mean.tail<2>();
    stats.segment<2>(9 * b + 4) = var.cwiseSqrt().head<2>();
    stats.segment<2>(9 * b + 6) = var.cwiseSqrt().tail<2>();
    stats[9 * b + 8] = energy > 1e-12 ? cnum / energy : 0.0;
  }
  return stats;
}

SliceDescriptor describe_arc(const GrayImage& img, const CameraModel& model,
                             const GeodesicSegment& sub) {
  Stats stats = band_stats(img, model, sub);
  SliceDescriptor desc;
  desc.bits = binarize(stats);
  desc.bits_flipped = binarize(flip_stats(stats));
  return desc;
}

}  // namespace

SliceDescriptor compute_slice_descriptor(const GrayImage& img, const CameraModel& model,
                                         const GeodesicSegment& sub) {
  // canonical orientation: lexicographically positive projected chord
  ChordFrame f = chord_frame(img, model, sub);
  GeodesicSegment oriented = sub;
  if (f.d_l.x() < 0.0 || (f.d_l.x() == 0.0 && f.d_l.y() < 0.0))
    std::swap(oriented.p_start, oriented.p_end);
  return describe_arc(img, model, oriented);
}

RlbdDescriptor compute_rlbd(const GrayImage& img, const CameraModel& model,
                            const GeodesicSegment& geo, const MatchParams& params) {
  params.validate();
  RlbdDescriptor out;
  out.m_deg = params.m_deg;
  // One orientation decision for the whole segment keeps slice descriptors
  // mutually consistent; a cross-frame flip then shows up as the reversed
  // alignment, handled by the flipped bit variant.
  bool reverse = false;
  try {
    ChordFrame whole = chord_frame(img, model, geo);
    reverse = whole.d_l.x() < 0.0 || (whole.d_l.x() == 0.0 && whole.d_l.y() < 0.0);
  } catch (const Error&) {
    // fall back to the raw arc order when the whole chord is degenerate
  }
  auto slices = slice_segment(geo, params.m_deg);
  if (reverse) {
    std::reverse(slices.begin(), slices.end());
    for (auto& s : slices) std::swap(s.p_start, s.p_end);
  }
  for (const auto& sub : slices) {
    try {
      chord_frame(img, model, sub);  // endpoint visibility gate
      out.slices.push_back(describe_arc(img, model, sub));
    } catch (const Error& e) {
      if (e.code() != Err::SliceOutsideImage) throw;
    }
  }
  if (out.slices.empty()) raise(Err::SliceOutsideImage, "no slice survives inside the image");
  return out;
}

RlbdDescriptor compute_rlbd(const GrayImage& img, const CameraModel& model,
                            const CurveSegment& seg, const MatchParams& params) {
  return compute_rlbd(img, model, seg.geo, params);
}

double rlbd_distance(const RlbdDescriptor& a, const RlbdDescriptor& b,
                     const MatchParams& params) {
  const int na = static_cast<int>(a.slices.size());
  const int nb = static_cast<int>(b.slices.size());
  if (na == 0 || nb == 0) return std::numeric_limits<double>::infinity();
  const int required = std::min(params.min_overlap_slices, std::min(na, nb));
  double best = std::numeric_limits<double>::infinity();
  for (int orientation = 0; orientation < 2; ++orientation) {
    for (int shift = -(na - 1); shift <= nb - 1; ++shift) {
      int lo = std::max(0, -shift);
      int hi = std::min(na, nb - shift);
      int overlap = hi - lo;
      if (overlap < required) continue;
      int total = 0;
      for (int i = lo; i < hi; ++i) {
        int jb = i + shift;
        if (orientation)
          total += a.slices[i].hamming_flipped(b.slices[nb - 1 - jb]);
        else
          total += a.slices[i].hamming(b.slices[jb]);
      }
      best = std::min(best, double(total) / (overlap * 256.0));
    }
  }
  return best;
}

std::vector<DescriptorMatch> match(const std::vector<RlbdDescriptor>& a,
                                   const std::vector<RlbdDescriptor>& b,
                                   const MatchParams& params) {
  params.validate();
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  std::vector<DescriptorMatch> out;
  if (na == 0 || nb == 0) return out;

  Eigen::MatrixXd dist(na, nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) dist(i, j) = rlbd_distance(a[i], b[j], params);

  if (params.mutual_check) {
    for (int i = 0; i < na; ++i) {
      int best_j = 0;
      for (int j = 1; j < nb; ++j)
        if (dist(i, j) < dist(i, best_j)) best_j = j;
      if (!(dist(i, best_j) <= params.hamming_frac_max)) continue;
      if (params.second_gap > 0.0 && nb > 1) {
        double second = std::numeric_limits<double>::infinity();
        for (int j = 0; j < nb; ++j)
          if (j != best_j) second = std::min(second, dist(i, j));
        if (dist(i, best_j) + params.second_gap > second) continue;  // ambiguous
      }
      bool mutual = true;
      for (int i2 = 0; i2 < na; ++i2)
        if (dist(i2, best_j) < dist(i, best_j)) {
          mutual = false;
          break;
        }
      if (mutual) out.push_back({i, best_j, 1.0 - dist(i, best_j)});
    }
    // mutual NN can still collide when distances tie; keep the first per j
    std::vector<char> used_b(nb, 0);
    std::vector<DescriptorMatch> dedup;
    for (const auto& m : out) {
      if (used_b[m.index_b]) continue;
      used_b[m.index_b] = 1;
      dedup.push_back(m);
    }
    out = std::move(dedup);
  } else {
    std::vector<std::tuple<double, int, int>> cands;
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j)
        if (dist(i, j) <= params.hamming_frac_max) cands.emplace_back(dist(i, j), i, j);
    std::sort(cands.begin(), cands.end());
    std::vector<char> used_a(na, 0), used_b(nb, 0);
    for (auto [d, i, j] : cands) {
      if (used_a[i] || used_b[j]) continue;
      used_a[i] = used_b[j] = 1;
      out.push_back({i, j, 1.0 - d});
    }
  }
  std::sort(out.begin(), out.end(), [](const DescriptorMatch& x, const DescriptorMatch& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.index_a != y.index_a) return x.index_a < y.index_a;
    return x.index_b < y.index_b;
  });
  return out;
}

}  // namespace geoseg
