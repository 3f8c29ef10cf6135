#include "geoseg/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace geoseg {

Scene gen_scene(uint64_t seed, int n_lines, const Eigen::Vector3d& bounds_min,
                const Eigen::Vector3d& bounds_max) {
  if (n_lines < 1) raise(Err::InvalidParameter, "n_lines must be >= 1");
  Scene scene;
  scene.seed = seed;
  scene.bounds_min = bounds_min;
  scene.bounds_max = bounds_max;
  DetRng rng(seed);
  auto inside = [&](const Eigen::Vector3d& p) {
    return (p.array() >= bounds_min.array()).all() && (p.array() <= bounds_max.array()).all();
  };
  while (static_cast<int>(scene.segments.size()) < n_lines) {
    Eigen::Vector3d mid;
    for (int i = 0; i < 3; ++i) mid[i] = rng.uniform(bounds_min[i], bounds_max[i]);
    Eigen::Vector3d dir = rng.unit_vector();
    double len = rng.uniform(0.5, 3.0);
    Eigen::Vector3d a = mid - 0.5 * len * dir;
    Eigen::Vector3d b = mid + 0.5 * len * dir;
    if (inside(a) && inside(b)) scene.segments.push_back({a, b});
  }
  return scene;
}

namespace {

struct Stroker {
  std::vector<float>& coverage;
  int width, height;
  bool wrap_x;
  double radius_out;  // coverage falls to 0 here
  double radius_in;   // full coverage inside

  void stamp_capsule(const PixelPoint& p0, const PixelPoint& p1) {
    double x_lo = std::min(p0.x(), p1.x()) - radius_out;
    double x_hi = std::max(p0.x(), p1.x()) + radius_out;
    double y_lo = std::min(p0.y(), p1.y()) - radius_out;
    double y_hi = std::max(p0.y(), p1.y()) + radius_out;
    Eigen::Vector2d seg = p1 - p0;
    double len2 = seg.squaredNorm();
    for (int y = static_cast<int>(std::floor(y_lo)); y <= static_cast<int>(std::ceil(y_hi)); ++y) {
      if (y < 0 || y >= height) continue;
      for (int x = static_cast<int>(std::floor(x_lo)); x <= static_cast<int>(std::ceil(x_hi));
           ++x) {
        int xi = x;
        if (wrap_x) {
          xi = x % width;
          if (xi < 0) xi += width;
        } else if (x < 0 || x >= width) {
          continue;
        }
        Eigen::Vector2d q(x, y);
        double t = len2 > 0.0 ? std::clamp((q - p0).dot(seg) / len2, 0.0, 1.0) : 0.0;
        double dist = (q - (p0 + t * seg)).norm();
        double cov = std::clamp((radius_out - dist) / (radius_out - radius_in), 0.0, 1.0);
        float& cell = coverage[size_t(y) * width + xi];
        if (cov > cell) cell = static_cast<float>(cov);
      }
    }
  }
};

}  // namespace

RenderOutput render(const Scene& scene, const Pose& camera_pose, const CameraModel& model,
                    int width, int height, const RenderStyle& style) {
  if (width <= 0 || height <= 0) raise(Err::InvalidParameter, "render size must be positive");
  RenderOutput out;
  std::vector<float> coverage(size_t(width) * height, 0.0f);
  const bool wrap = model.wraps_horizontal();
  Stroker stroker{coverage, width, height, wrap, 0.5 * style.stroke_width + 0.5,
                  std::max(0.0, 0.5 * style.stroke_width - 0.5)};

  auto try_project = [&](const Bearing& b, PixelPoint& px) -> bool {
    try {
      px = model.project(b);
    } catch (const Error&) {
      return false;
    }
    return px.x() > -0.5 - 64 && px.x() < width - 0.5 + 64 && px.y() > -0.5 - 64 &&
           px.y() < height - 0.5 + 64;
  };

  for (size_t id = 0; id < scene.segments.size(); ++id) {
    Eigen::Vector3d a_c = camera_pose.inv_apply(scene.segments[id].a);
    Eigen::Vector3d b_c = camera_pose.inv_apply(scene.segments[id].b);
    if (a_c.norm() < 1e-9 || b_c.norm() < 1e-9) continue;  // camera on an endpoint
    Bearing ah = a_c.normalized(), bh = b_c.normalized();
    Eigen::Vector3d cross = a_c.cross(b_c);
    if (cross.norm() < 1e-12 * a_c.norm() * b_c.norm()) continue;  // collinear with camera
    GeodesicSegment whole{GreatCircle{cross.normalized()}, ah, bh};
    double arc = arc_length(whole);
    if (arc < 1e-9 || arc > kPi - 1e-9) continue;

    Eigen::Vector3d u = ah;
    Eigen::Vector3d k = whole.circle.k;
    Eigen::Vector3d w = k.cross(u);
    if (w.dot(bh) < 0.0) {
      k = -k;
      w = -w;
    }
    auto at = [&](double phi) -> Bearing { return (u * std::cos(phi) + w * std::sin(phi)); };

    auto on_image = [&](const PixelPoint& px) {
      bool x_ok = wrap ? true : (px.x() >= -0.5 && px.x() <= width - 0.5);
      return x_ok && px.y() >= -0.5 && px.y() <= height - 0.5;
    };

    for (auto [phi_a, phi_b] : band_intervals(whole, model.fov_min_deg(), model.fov_max_deg())) {
      // Walk the interval adaptively, aiming for <= 0.5 px between samples,
      // stroking capsules between consecutive samples. GT arcs are split into
      // runs that stay on the image rectangle; runs shorter than 30 px of
      // projected arc are dropped.
      double phi = phi_a;
      double step = std::min(1e-3, (phi_b - phi_a) * 0.5);
      PixelPoint prev;
      bool have_prev = try_project(at(phi_a).normalized(), prev);
      bool prev_on = have_prev && on_image(prev);
      double run_start = prev_on ? phi_a : -1.0;
      double run_px = 0.0;
      auto close_run = [&](double run_end) {
        if (run_start >= 0.0 && run_px >= 30.0 && run_end > run_start) {
          GeodesicSegment gt_seg{GreatCircle{k}, at(run_start).normalized(),
                                 at(run_end).normalized()};
          out.gt.push_back({static_cast<int>(id), gt_seg});
          out.gt_circles.push_back(gt_seg.circle);
        }
        run_start = -1.0;
        run_px = 0.0;
      };
      int guard = 0;
      while (phi < phi_b - 1e-12 && ++guard < 400000) {
        double next_phi = std::min(phi_b, phi + step);
        PixelPoint cur;
        bool ok = try_project(at(next_phi).normalized(), cur);
        if (ok && have_prev) {
          double d = model.pixel_distance(cur, prev);
          if (d > 0.5 && next_phi - phi > 1e-7) {
            step = std::max(1e-7, step * 0.5);  // refine before committing
            continue;
          }
          bool seam_jump = (cur - prev).norm() > 8.0 && d <= 8.0;
          if (!seam_jump)
            stroker.stamp_capsule(prev, cur);
          else
            stroker.stamp_capsule(cur, cur);
          bool cur_on = on_image(cur);
          if (cur_on && prev_on) {
            run_px += d;
          } else if (cur_on && !prev_on) {
            run_start = phi;  // entering the rectangle
            run_px = d;
          } else if (!cur_on && prev_on) {
            close_run(phi);
          }
          prev_on = cur_on;
          if (d < 0.25) step = std::min(step * 2.0, (phi_b - phi_a));
        } else if (ok) {
          stroker.stamp_capsule(cur, cur);
          prev_on = on_image(cur);
          if (prev_on && run_start < 0.0) {
            run_start = next_phi;
            run_px = 0.0;
          }
        } else {
          if (prev_on) close_run(phi);
          prev_on = false;
        }
        prev = cur;
        have_prev = ok;
        phi = next_phi;
      }
      close_run(phi_b);
    }
  }

  // Compose: background + stroke coverage, FoV mask, optional noise.
  GrayImage img(width, height);
  DetRng noise(style.noise_seed);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double value = 0.0;
      bool in_band = false;
      try {
        in_band = model.in_fov(model.unproject(PixelPoint(x, y)));
      } catch (const Error&) {
        in_band = false;
      }
      if (in_band) {
        double cov = coverage[size_t(y) * width + x];
        value = style.background + (style.line_intensity - style.background) * cov;
        if (style.noise_sigma > 0.0) value += style.noise_sigma * noise.gaussian();
      } else if (style.noise_sigma > 0.0) {
        noise.gaussian();  // keep the stream position independent of the mask
      }
      img.at(x, y) = static_cast<uint8_t>(std::clamp(std::lround(value), 0l, 255l));
    }
  }
  out.image = std::move(img);
  return out;
}

}  // namespace geoseg
