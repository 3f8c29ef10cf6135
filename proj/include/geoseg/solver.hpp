#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geoseg/lines.hpp"
#include "geoseg/types.hpp"

namespace geoseg {

/// Inverse-distance point: world point = host_pose * (host_bearing / lambda).
struct PointFeature {
  int host_frame = 0;
  Bearing host_bearing;
  double lambda = 1.0;  // 1 / meters, > 0
};

struct PointObservation {
  int frame = 0;
  int point = 0;
  Bearing obs;
};

struct LineObservationRef {
  int frame = 0;
  int line = 0;
  Bearing p_s;
  Bearing p_e;
};

/// Pose components that stay frozen during the solve:
/// [rot_x, rot_y, rot_z, t_x, t_y, t_z] on the tangent space.
using FixedMask = std::array<bool, 6>;

struct BaProblem {
  std::vector<Pose> poses;
  std::vector<FixedMask> fixed_mask;  // parallel to poses
  std::vector<PointFeature> points;
  std::vector<OrthonormalLine> lines;
  std::vector<PointObservation> point_obs;
  std::vector<LineObservationRef> line_obs;
  std::vector<Pose> gt_poses;  // optional, for ATE reporting

  void validate() const;
};

struct SolveOptions {
  int max_iters = 100;
  double huber_delta_point = 1.5 / 300.0;  // 1.5 px at a nominal 300 px focal
  double huber_delta_line = 1.5 / 300.0;
  double lm_lambda_init = 1e-4;
  double rel_cost_tol = 1e-10;
  double grad_tol = 1e-10;
  bool use_huber = true;
};

struct SolveReport {
  std::vector<double> iteration_costs;  // cost after each accepted step
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double final_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  std::optional<double> ate;  // vs gt_poses when present
};

/// Tangent-plane reprojection residual of one point observation. The basis at
/// the observed bearing comes from tangent_basis(). Throws PointAtCameraCenter.
Eigen::Vector2d point_residual(const Pose& host, const Pose& target, const PointFeature& feat,
                               const Bearing& observed);

/// Jacobian of point_residual, 2 x 13:
/// [host rot, host t, target rot, target t, lambda].
Eigen::Matrix<double, 2, 13> point_residual_jacobian(const Pose& host, const Pose& target,
                                                     const PointFeature& feat,
                                                     const Bearing& observed);

/// Huber loss on a squared residual norm: (cost, dcost/dr2).
/// cost = r2 when sqrt(r2) <= delta, else 2 delta sqrt(r2) - delta^2.
std::pair<double, double> huber(double r2, double delta);

/// Robustified Levenberg-Marquardt over poses, inverse-distance points and
/// orthonormal lines; dense normal equations, deterministic. The problem is
/// optimized in place. Throws SingularNormalEquations when damping cannot
/// rescue the system.
SolveReport solve(BaProblem& problem, const SolveOptions& opts = {});

/// Text problem format (sections POSES, POINTS, LINES, POINT_OBS, LINE_OBS,
/// optional GT; '#' comments). Throws ParseError.
BaProblem load_problem(std::istream& in);
BaProblem load_problem_file(const std::string& path);

std::string report_to_json(const SolveReport& report);

}  // namespace geoseg
