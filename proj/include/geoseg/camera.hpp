#pragma once

#include <array>
#include <memory>
#include <string>

#include "geoseg/errors.hpp"
#include "geoseg/types.hpp"

namespace geoseg {

enum class CameraKind { Equirectangular, UnifiedMei, Scaramuzza, Pinhole };

/// Bidirectional pixel <-> unit-sphere mapping. Models are immutable after
/// construction; every method is const and safe to call concurrently.
///
/// All models carry a polar-angle validity band [fov_min_deg, fov_max_deg]
/// measured from the +z optical axis. A panoramic annular lens with a
/// 360x(40..120) field of view is expressed as the band [40, 120].
class CameraModel {
public:
  virtual ~CameraModel() = default;

  virtual CameraKind kind() const = 0;
  virtual std::string name() const = 0;

  /// Unit bearing -> pixel. Throws BearingOutOfFov outside the band and
  /// ProjectionSingularity where the forward map is undefined.
  virtual PixelPoint project(const Bearing& b) const = 0;

  /// Pixel -> unit bearing. Throws PixelOutOfDomain outside the model's
  /// invertible region (image bounds when the model knows them).
  virtual Bearing unproject(const PixelPoint& p) const = 0;

  double fov_min_deg() const { return fov_min_deg_; }
  double fov_max_deg() const { return fov_max_deg_; }

  /// Image size when the model carries one; 0 otherwise (MEI, pinhole).
  int width() const { return width_; }
  int height() const { return height_; }

  /// True for full-width equirectangular models, where pixel x wraps mod W.
  virtual bool wraps_horizontal() const { return false; }

  bool in_fov(const Bearing& b) const {
    double polar = polar_angle_deg(b);
    return polar >= fov_min_deg_ && polar <= fov_max_deg_;
  }

  /// Pixel distance that respects the horizontal wrap of panoramic models.
  double pixel_distance(const PixelPoint& a, const PixelPoint& b) const {
    double dx = a.x() - b.x();
    if (wraps_horizontal() && width_ > 0) {
      dx = std::abs(dx);
      if (dx > width_ / 2.0) dx = width_ - dx;
    }
    return std::hypot(dx, a.y() - b.y());
  }

protected:
  void set_fov(double min_deg, double max_deg) {
    if (!(min_deg < max_deg))
      raise(Err::InvalidParameter, "fov_deg band must satisfy min < max");
    fov_min_deg_ = min_deg;
    fov_max_deg_ = max_deg;
  }

  void require_in_fov(const Bearing& b) const;

  double fov_min_deg_ = 0.0;
  double fov_max_deg_ = 180.0;
  int width_ = 0;
  int height_ = 0;
};

/// theta = atan2(beta, alpha), lat = asin(gamma);
/// x = (theta/2pi + 0.5) * W (wrapped into [0, W)), y = (0.5 - lat/pi) * H.
/// atan2(0, 0) at the poles is taken as 0.
class EquirectangularCamera final : public CameraModel {
public:
  EquirectangularCamera(int width, int height, double fov_min_deg = 0.0,
                        double fov_max_deg = 180.0);

  CameraKind kind() const override { return CameraKind::Equirectangular; }
  std::string name() const override { return "equirectangular"; }
  PixelPoint project(const Bearing& b) const override;
  Bearing unproject(const PixelPoint& p) const override;
  bool wraps_horizontal() const override { return true; }
};

/// Unified (MEI) catadioptric model: m = (a/(g+xi), b/(g+xi)), optional
/// radial-tangential distortion, then the pinhole intrinsics.
class UnifiedMeiCamera final : public CameraModel {
public:
  UnifiedMeiCamera(double xi, double fx, double fy, double cx, double cy, double k1 = 0,
                   double k2 = 0, double p1 = 0, double p2 = 0, double fov_min_deg = 0.0,
                   double fov_max_deg = 120.0);

  CameraKind kind() const override { return CameraKind::UnifiedMei; }
  std::string name() const override { return "mei"; }
  PixelPoint project(const Bearing& b) const override;
  Bearing unproject(const PixelPoint& p) const override;

  double xi() const { return xi_; }

private:
  Eigen::Vector2d distort(const Eigen::Vector2d& m) const;
  Eigen::Vector2d undistort(const Eigen::Vector2d& md) const;

  double xi_, fx_, fy_, cx_, cy_;
  double k1_, k2_, p1_, p2_;
  bool has_distortion_;
};

/// Scaramuzza omnidirectional model. The calibrated polynomial
/// z(rho) = a0 + a1 rho + ... + a4 rho^4 back-projects an image radius to the
/// axial component of the ray; the forward map inverts it with guarded Newton
/// iteration (max 50 iterations, |residual| tolerance 1e-10), initialized from
/// the linear-in-polar-angle approximation rho ~= a0 * polar.
class ScaramuzzaCamera final : public CameraModel {
public:
  ScaramuzzaCamera(const std::array<double, 5>& poly, double cx, double cy, double c, double d,
                   double e, int width, int height, double fov_min_deg = 0.0,
                   double fov_max_deg = 120.0);

  CameraKind kind() const override { return CameraKind::Scaramuzza; }
  std::string name() const override { return "scaramuzza"; }
  PixelPoint project(const Bearing& b) const override;
  Bearing unproject(const PixelPoint& p) const override;

  double poly(double rho) const;
  double poly_deriv(double rho) const;

private:
  std::array<double, 5> a_;
  double cx_, cy_, c_, d_, e_;
  double inv_det_;  // 1 / (c - d*e)
};

class PinholeCamera final : public CameraModel {
public:
  PinholeCamera(double fx, double fy, double cx, double cy, double fov_min_deg = 0.0,
                double fov_max_deg = 180.0);

  CameraKind kind() const override { return CameraKind::Pinhole; }
  std::string name() const override { return "pinhole"; }
  PixelPoint project(const Bearing& b) const override;
  Bearing unproject(const PixelPoint& p) const override;

private:
  double fx_, fy_, cx_, cy_;
};

/// True iff the polar angle of b lies inside the model's band.
bool is_valid_bearing(const CameraModel& model, const Bearing& b);

/// True iff p unprojects (bounds included where known) and lands in the band.
bool is_valid_pixel(const CameraModel& model, const PixelPoint& p);

/// Parses a camera config (UTF-8 JSON). Throws ParseError on malformed input
/// and InvalidParameter on out-of-range values.
std::unique_ptr<CameraModel> load_model(const std::string& config_text);

/// Convenience: load_model over a file's contents. Throws IoError.
std::unique_ptr<CameraModel> load_model_file(const std::string& path);

}  // namespace geoseg
