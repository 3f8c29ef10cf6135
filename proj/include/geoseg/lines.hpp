#pragma once

#include <Eigen/Geometry>

#include "geoseg/errors.hpp"
#include "geoseg/types.hpp"

namespace geoseg {

/// Rigid transform, camera/body to world: x_w = q * x + t.
struct Pose {
  Eigen::Quaterniond q{1, 0, 0, 0};
  Eigen::Vector3d t{0, 0, 0};

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return q * x + t; }
  Eigen::Vector3d inv_apply(const Eigen::Vector3d& x) const { return q.conjugate() * (x - t); }

  Pose inverse() const {
    Pose p;
    p.q = q.conjugate();
    p.t = -(q.conjugate() * t);
    return p;
  }

  /// this * other (apply other first).
  Pose compose(const Pose& other) const {
    Pose p;
    p.q = (q * other.q).normalized();
    p.t = q * other.t + t;
    return p;
  }
};

/// Plucker line (n, d): moment and direction, n . d = 0, defined up to
/// positive scale. Construction canonicalizes to |d| = 1.
struct PluckerLine {
  Eigen::Vector3d n;
  Eigen::Vector3d d;

  static PluckerLine from_point_direction(const Eigen::Vector3d& point,
                                          const Eigen::Vector3d& direction) {
    Eigen::Vector3d du = direction.normalized();
    return PluckerLine{point.cross(du), du};
  }

  PluckerLine normalized() const {
    double nd = d.norm();
    return {n / nd, d / nd};
  }

  /// Distance from the origin to the line.
  double origin_distance() const { return n.norm() / d.norm(); }
};

/// Minimal 4-DoF line parameterization: psi are ZYX Euler angles of the
/// rotation whose columns are (n/|n|, d/|d|, n x d normalized); phi in
/// (0, pi/2) encodes the origin distance as cos(phi)/sin(phi).
struct OrthonormalLine {
  Eigen::Vector3d psi;
  double phi;
};

/// Endpoint bearings of an observed geodesic segment in one frame.
struct LineObservation {
  int frame_id = 0;
  Bearing p_s;
  Bearing p_e;
};

/// R = Rz(psi0) * Ry(psi1) * Rx(psi2).
Eigen::Matrix3d euler_zyx_to_matrix(const Eigen::Vector3d& psi);
Eigen::Vector3d matrix_to_euler_zyx(const Eigen::Matrix3d& r);

/// Throws LineThroughOrigin when |n| < 1e-12 |d|.
OrthonormalLine plucker_to_orthonormal(const PluckerLine& line);
PluckerLine orthonormal_to_plucker(const OrthonormalLine& o);

/// d' = R d, n' = R n + t x (R d); maps a line expressed in the pose's source
/// frame into its target frame (camera line -> world line for a camera pose).
PluckerLine transform_line(const Pose& pose, const PluckerLine& line);

/// World line from two observations of the same 3D line: intersection of the
/// two back-projected planes via the dual Plucker matrix. Throws
/// DegenerateGeometry when the planes are within 0.5 degrees of parallel.
PluckerLine triangulate_line(const LineObservation& obs1, const Pose& pose1,
                             const LineObservation& obs2, const Pose& pose2);

/// [ |p_s . n_c| / |n_c| ; |p_e . n_c| / |n_c| ] with n_c the camera-frame
/// moment vector. Throws DegenerateLine when |n_c| vanishes.
Eigen::Vector2d line_residual(const PluckerLine& line_world, const Pose& cam,
                              const LineObservation& obs);

/// Signed variant used inside the optimizer; squares to the same cost.
Eigen::Vector2d line_residual_signed(const PluckerLine& line_world, const Pose& cam,
                                     const LineObservation& obs);

/// Jacobian of the signed residual, 2 x 10, columns
/// [rotation tangent (right-multiplied), translation, psi, phi].
/// hold_pose zeroes the first six columns.
Eigen::Matrix<double, 2, 10> line_residual_jacobian(const OrthonormalLine& line, const Pose& cam,
                                                    const LineObservation& obs,
                                                    bool hold_pose = false);

}  // namespace geoseg
