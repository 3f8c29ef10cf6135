#include "geoseg/lines.hpp"

#include <cmath>

namespace geoseg {

Eigen::Matrix3d euler_zyx_to_matrix(const Eigen::Vector3d& psi) {
  return (Eigen::AngleAxisd(psi[0], Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(psi[1], Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(psi[2], Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Vector3d matrix_to_euler_zyx(const Eigen::Matrix3d& r) {
  // r(2,0) = -sin(pitch); at gimbal lock roll is pinned to 0.
  double sp = -r(2, 0);
  double pitch = std::asin(clamp_unit(sp));
  double yaw, roll;
  if (std::abs(sp) > 1.0 - 1e-12) {
    roll = 0.0;
    yaw = std::atan2(-r(0, 1), r(1, 1));
  } else {
    yaw = std::atan2(r(1, 0), r(0, 0));
    roll = std::atan2(r(2, 1), r(2, 2));
  }
  return {yaw, pitch, roll};
}

OrthonormalLine plucker_to_orthonormal(const PluckerLine& line) {
  double nn = line.n.norm(), nd = line.d.norm();
  if (!(nd > 0.0)) raise(Err::DegenerateLine, "zero direction");
  if (nn < 1e-12 * nd) raise(Err::LineThroughOrigin, "moment vanishes");
  Eigen::Matrix3d u;
  u.col(0) = line.n / nn;
  u.col(1) = line.d / nd;
  u.col(2) = u.col(0).cross(u.col(1)).normalized();
  OrthonormalLine o;
  o.psi = matrix_to_euler_zyx(u);
  o.phi = std::atan2(nd, nn);
  return o;
}

PluckerLine orthonormal_to_plucker(const OrthonormalLine& o) {
  Eigen::Matrix3d u = euler_zyx_to_matrix(o.psi);
  double s = std::sin(o.phi);
  if (!(s > 0.0)) raise(Err::InvalidParameter, "phi must lie in (0, pi/2)");
  // (cos phi * u0, sin phi * u1) rescaled to the |d| = 1 canonical form.
  return {u.col(0) * (std::cos(o.phi) / s), u.col(1)};
}

PluckerLine transform_line(const Pose& pose, const PluckerLine& line) {
  Eigen::Vector3d d = pose.q * line.d;
  Eigen::Vector3d n = pose.q * line.n + pose.t.cross(d);
  return {n, d};
}

PluckerLine triangulate_line(const LineObservation& obs1, const Pose& pose1,
                             const LineObservation& obs2, const Pose& pose2) {
  Eigen::Vector3d m1 = pose1.q * obs1.p_s.cross(obs1.p_e);
  Eigen::Vector3d m2 = pose2.q * obs2.p_s.cross(obs2.p_e);
  if (m1.norm() < 1e-12 || m2.norm() < 1e-12)
    raise(Err::DegenerateGeometry, "observation endpoints are parallel");
  double tilt = angle_between(m1, m2);
  tilt = std::min(tilt, kPi - tilt);
  if (tilt < deg2rad(0.5))
    raise(Err::DegenerateGeometry, "back-projected planes near parallel");
  double e1 = -m1.dot(pose1.t);
  double e2 = -m2.dot(pose2.t);
  // Dual Plucker matrix pi1 pi2^T - pi2 pi1^T in closed form.
  Eigen::Vector3d d = m1.cross(m2);
  Eigen::Vector3d n = m2 * e1 - m1 * e2;
  return PluckerLine{n, d}.normalized();
}

namespace {

Eigen::Vector3d camera_moment(const PluckerLine& line_world, const Pose& cam) {
  // n_c = R^T (n_w - t x d_w)
  return cam.q.conjugate() * (line_world.n - cam.t.cross(line_world.d));
}

}  // namespace

Eigen::Vector2d line_residual_signed(const PluckerLine& line_world, const Pose& cam,
                                     const LineObservation& obs) {
  Eigen::Vector3d nc = camera_moment(line_world, cam);
  double norm = nc.norm();
  if (norm <= 1e-12) raise(Err::DegenerateLine, "camera center lies on the line");
  return {obs.p_s.dot(nc) / norm, obs.p_e.dot(nc) / norm};
}

Eigen::Vector2d line_residual(const PluckerLine& line_world, const Pose& cam,
                              const LineObservation& obs) {
  return line_residual_signed(line_world, cam, obs).cwiseAbs();
}

Eigen::Matrix<double, 2, 10> line_residual_jacobian(const OrthonormalLine& line, const Pose& cam,
                                                    const LineObservation& obs, bool hold_pose) {
  const Eigen::Matrix3d u = euler_zyx_to_matrix(line.psi);
  const double cp = std::cos(line.phi), sp = std::sin(line.phi);
  const Eigen::Vector3d n_w = cp * u.col(0);
  const Eigen::Vector3d d_w = sp * u.col(1);

  const Eigen::Matrix3d rt = cam.q.conjugate().toRotationMatrix();
  const Eigen::Vector3d v = n_w - cam.t.cross(d_w);
  const Eigen::Vector3d nc = rt * v;
  const double norm = nc.norm();
  if (norm <= 1e-12) raise(Err::DegenerateLine, "camera center lies on the line");
  const Eigen::Vector3d nhat = nc / norm;

  // dr_i/dnc = (p_i - r_i nhat)^T / |nc|
  Eigen::Matrix<double, 2, 3> dr_dnc;
  const Bearing endpoints[2] = {obs.p_s, obs.p_e};
  for (int i = 0; i < 2; ++i) {
    double r = endpoints[i].dot(nhat);
    dr_dnc.row(i) = (endpoints[i] - r * nhat).transpose() / norm;
  }

  // Derivatives of U columns with respect to the three Euler angles.
  const double cy = std::cos(line.psi[0]), sy = std::sin(line.psi[0]);
  const double cq = std::cos(line.psi[1]), sq = std::sin(line.psi[1]);
  const double cr = std::cos(line.psi[2]), sr = std::sin(line.psi[2]);
  Eigen::Matrix3d rz, ry, rx, drz, dry, drx;
  rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  ry << cq, 0, sq, 0, 1, 0, -sq, 0, cq;
  rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  drz << -sy, -cy, 0, cy, -sy, 0, 0, 0, 0;
  dry << -sq, 0, cq, 0, 0, 0, -cq, 0, -sq;
  drx << 0, 0, 0, 0, -sr, -cr, 0, cr, -sr;
  const Eigen::Matrix3d du_dpsi[3] = {drz * ry * rx, rz * dry * rx, rz * ry * drx};

  Eigen::Matrix<double, 2, 10> jac;
  if (hold_pose) {
    jac.block<2, 6>(0, 0).setZero();
  } else {
    // Right-multiplied rotation increment: dnc/dtheta = [nc]x.
    jac.block<2, 3>(0, 0) = dr_dnc * skew(nc);
    // dnc/dt = R^T [d_w]x.
    jac.block<2, 3>(0, 3) = dr_dnc * (rt * skew(d_w));
  }
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d dn = cp * du_dpsi[i].col(0);
    Eigen::Vector3d dd = sp * du_dpsi[i].col(1);
    jac.col(6 + i) = dr_dnc * (rt * (dn - cam.t.cross(dd)));
  }
  Eigen::Vector3d dn_phi = -sp * u.col(0);
  Eigen::Vector3d dd_phi = cp * u.col(1);
  jac.col(9) = dr_dnc * (rt * (dn_phi - cam.t.cross(dd_phi)));
  return jac;
}

}  // namespace geoseg
