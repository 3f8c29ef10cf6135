#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <utility>

namespace geoseg {

/// Unit observation direction on S^2. Operations that construct bearings keep
/// them normalized to 1e-9; consumers may rely on that.
using Bearing = Eigen::Vector3d;

/// Continuous pixel coordinates, origin at the top-left pixel center,
/// x rightward, y downward.
using PixelPoint = Eigen::Vector2d;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

inline double clamp_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

/// Angle between two vectors, robust to slight denormalization.
inline double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  double denom = a.norm() * b.norm();
  if (denom <= 0.0) return 0.0;
  return std::acos(clamp_unit(a.dot(b) / denom));
}

/// Polar angle from the +z optical axis, in degrees.
inline double polar_angle_deg(const Bearing& b) { return rad2deg(std::acos(clamp_unit(b.z()))); }

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Rodrigues rotation of v about a unit axis.
inline Eigen::Vector3d rotate_about(const Eigen::Vector3d& v, const Eigen::Vector3d& axis_unit,
                                    double angle) {
  double c = std::cos(angle), s = std::sin(angle);
  return v * c + axis_unit.cross(v) * s + axis_unit * (axis_unit.dot(v)) * (1.0 - c);
}

/// Deterministic orthonormal tangent basis (b1, b2) at a unit bearing,
/// seeded from the coordinate axis with the smallest |component|.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> tangent_basis(const Bearing& b) {
  int i = 0;
  if (std::abs(b.y()) < std::abs(b.x())) i = 1;
  if (std::abs(b.z()) < std::abs(b[i])) i = 2;
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  axis[i] = 1.0;
  Eigen::Vector3d b1 = axis.cross(b).normalized();
  Eigen::Vector3d b2 = b.cross(b1);
  return {b1, b2};
}

/// splitmix64: tiny deterministic RNG used wherever byte-identical output
/// across platforms matters (std distributions are implementation-defined).
class DetRng {
public:
  explicit DetRng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Box-Muller; spares are cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::Vector3d unit_vector() {
    double z = 1.0 - 2.0 * next_double();
    double phi = 2.0 * kPi * next_double();
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace geoseg
