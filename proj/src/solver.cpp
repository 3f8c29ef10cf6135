#include "geoseg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace geoseg {

void BaProblem::validate() const {
  if (poses.empty()) raise(Err::InvalidParameter, "problem has no poses");
  if (fixed_mask.size() != poses.size())
    raise(Err::InvalidParameter, "fixed_mask must parallel poses");
  const int np = static_cast<int>(poses.size());
  const int npt = static_cast<int>(points.size());
  const int nl = static_cast<int>(lines.size());
  bool fully_fixed = false;
  for (const auto& m : fixed_mask)
    fully_fixed |= std::all_of(m.begin(), m.end(), [](bool b) { return b; });
  if (!fully_fixed) raise(Err::InvalidParameter, "at least one pose must be fully fixed");
  for (const auto& p : points) {
    if (p.host_frame < 0 || p.host_frame >= np) raise(Err::InvalidParameter, "bad host frame");
    if (!(p.lambda > 0.0)) raise(Err::InvalidParameter, "lambda must be positive");
  }
  for (const auto& o : point_obs)
    if (o.frame < 0 || o.frame >= np || o.point < 0 || o.point >= npt)
      raise(Err::InvalidParameter, "point observation references a missing entity");
  for (const auto& o : line_obs)
    if (o.frame < 0 || o.frame >= np || o.line < 0 || o.line >= nl)
      raise(Err::InvalidParameter, "line observation references a missing entity");
  if (!gt_poses.empty() && gt_poses.size() != poses.size())
    raise(Err::InvalidParameter, "GT section must match the pose count");
}

Eigen::Vector2d point_residual(const Pose& host, const Pose& target, const PointFeature& feat,
                               const Bearing& observed) {
  Eigen::Vector3d world = host.apply(feat.host_bearing / feat.lambda);
  Eigen::Vector3d in_target = target.inv_apply(world);
  double norm = in_target.norm();
  if (norm <= 1e-12) raise(Err::PointAtCameraCenter, "predicted point at the camera center");
  Bearing predicted = in_target / norm;
  auto [b1, b2] = tangent_basis(observed);
  Eigen::Vector3d diff = predicted - observed;
  return {b1.dot(diff), b2.dot(diff)};
}

Eigen::Matrix<double, 2, 13> point_residual_jacobian(const Pose& host, const Pose& target,
                                                     const PointFeature& feat,
                                                     const Bearing& observed) {
  const Eigen::Vector3d local = feat.host_bearing / feat.lambda;
  const Eigen::Vector3d world = host.apply(local);
  const Eigen::Matrix3d r_t = target.q.conjugate().toRotationMatrix();
  const Eigen::Vector3d in_target = r_t * (world - target.t);
  const double norm = in_target.norm();
  if (norm <= 1e-12) raise(Err::PointAtCameraCenter, "predicted point at the camera center");
  const Eigen::Vector3d predicted = in_target / norm;

  auto [b1, b2] = tangent_basis(observed);
  Eigen::Matrix<double, 2, 3> basis;
  basis.row(0) = b1.transpose();
  basis.row(1) = b2.transpose();

  // r = B (x/|x| - obs); dr/dx = B (I - pp^T)/|x|
  Eigen::Matrix<double, 2, 3> dr_dx =
      basis * (Eigen::Matrix3d::Identity() - predicted * predicted.transpose()) / norm;

  Eigen::Matrix<double, 2, 13> jac;
  const Eigen::Matrix3d r_h = host.q.toRotationMatrix();
  // host rotation (right-multiplied increment): dX_w/dtheta_h = -R_h [local]x
  jac.block<2, 3>(0, 0) = dr_dx * r_t * (-r_h * skew(local));
  // host translation
  jac.block<2, 3>(0, 3) = dr_dx * r_t;
  // target rotation: d(in_target)/dtheta_t = [in_target]x
  jac.block<2, 3>(0, 6) = dr_dx * skew(in_target);
  // target translation
  jac.block<2, 3>(0, 9) = -dr_dx * r_t;
  // lambda: dlocal/dlambda = -host_bearing / lambda^2
  jac.col(12) = dr_dx * r_t * r_h * (-feat.host_bearing / (feat.lambda * feat.lambda));
  return jac;
}

std::pair<double, double> huber(double r2, double delta) {
  if (r2 < 0.0) raise(Err::InvalidParameter, "squared norm must be non-negative");
  double r = std::sqrt(r2);
  if (r <= delta) return {r2, 1.0};
  return {2.0 * delta * r - delta * delta, r > 0.0 ? delta / r : 1.0};
}

namespace {

struct ParamLayout {
  // global free-parameter index per component; -1 when fixed
  std::vector<std::array<int, 6>> pose_idx;
  std::vector<int> point_idx;
  std::vector<std::array<int, 4>> line_idx;
  int n_params = 0;
};

ParamLayout make_layout(const BaProblem& p) {
  ParamLayout layout;
  int next = 0;
  layout.pose_idx.resize(p.poses.size());
  for (size_t i = 0; i < p.poses.size(); ++i)
    for (int c = 0; c < 6; ++c) layout.pose_idx[i][c] = p.fixed_mask[i][c] ? -1 : next++;
  layout.point_idx.resize(p.points.size());
  for (size_t i = 0; i < p.points.size(); ++i) layout.point_idx[i] = next++;
  layout.line_idx.resize(p.lines.size());
  for (size_t i = 0; i < p.lines.size(); ++i)
    for (int c = 0; c < 4; ++c) layout.line_idx[i][c] = next++;
  layout.n_params = next;
  return layout;
}

void retract(BaProblem& p, const ParamLayout& layout, const Eigen::VectorXd& delta) {
  for (size_t i = 0; i < p.poses.size(); ++i) {
    Eigen::Vector3d dtheta = Eigen::Vector3d::Zero(), dt = Eigen::Vector3d::Zero();
    for (int c = 0; c < 3; ++c) {
      if (layout.pose_idx[i][c] >= 0) dtheta[c] = delta[layout.pose_idx[i][c]];
      if (layout.pose_idx[i][c + 3] >= 0) dt[c] = delta[layout.pose_idx[i][c + 3]];
    }
    if (dtheta.squaredNorm() > 0.0) {
      Eigen::AngleAxisd aa(dtheta.norm(), dtheta.normalized());
      p.poses[i].q = (p.poses[i].q * Eigen::Quaterniond(aa)).normalized();
    }
    p.poses[i].t += dt;
  }
  for (size_t i = 0; i < p.points.size(); ++i) {
    p.points[i].lambda = std::max(1e-8, p.points[i].lambda + delta[layout.point_idx[i]]);
  }
  for (size_t i = 0; i < p.lines.size(); ++i) {
    for (int c = 0; c < 3; ++c) p.lines[i].psi[c] += delta[layout.line_idx[i][c]];
    p.lines[i].phi =
        std::clamp(p.lines[i].phi + delta[layout.line_idx[i][3]], 1e-6, kPi / 2.0 - 1e-6);
    // deterministic nudge away from the Euler gimbal lock
    if (std::abs(std::cos(p.lines[i].psi[1])) < 1e-6) p.lines[i].psi[1] += 1e-5;
  }
}

struct CostAccumulator {
  const BaProblem& p;
  const SolveOptions& opts;
  const std::vector<int>& point_order;
  const std::vector<int>& line_order;

  double cost_only() const {
    double total = 0.0;
    for (int oi : point_order) {
      const auto& obs = p.point_obs[oi];
      Eigen::Vector2d r =
          point_residual(p.poses[p.points[obs.point].host_frame], p.poses[obs.frame],
                         p.points[obs.point], obs.obs);
      total += opts.use_huber ? huber(r.squaredNorm(), opts.huber_delta_point).first
                              : r.squaredNorm();
    }
    for (int oi : line_order) {
      const auto& obs = p.line_obs[oi];
      PluckerLine line = orthonormal_to_plucker(p.lines[obs.line]);
      Eigen::Vector2d r = line_residual_signed(line, p.poses[obs.frame],
                                               LineObservation{obs.frame, obs.p_s, obs.p_e});
      total +=
          opts.use_huber ? huber(r.squaredNorm(), opts.huber_delta_line).first : r.squaredNorm();
    }
    return total;
  }
};

}  // namespace

SolveReport solve(BaProblem& problem, const SolveOptions& opts) {
  problem.validate();
  ParamLayout layout = make_layout(problem);
  SolveReport report;

  // Canonical assembly order, independent of input observation order.
  std::vector<int> point_order(problem.point_obs.size());
  std::iota(point_order.begin(), point_order.end(), 0);
  std::sort(point_order.begin(), point_order.end(), [&](int a, int b) {
    const auto &oa = problem.point_obs[a], &ob = problem.point_obs[b];
    if (oa.point != ob.point) return oa.point < ob.point;
    if (oa.frame != ob.frame) return oa.frame < ob.frame;
    return a < b;
  });
  std::vector<int> line_order(problem.line_obs.size());
  std::iota(line_order.begin(), line_order.end(), 0);
  std::sort(line_order.begin(), line_order.end(), [&](int a, int b) {
    const auto &oa = problem.line_obs[a], &ob = problem.line_obs[b];
    if (oa.line != ob.line) return oa.line < ob.line;
    if (oa.frame != ob.frame) return oa.frame < ob.frame;
    return a < b;
  });

  const int n = layout.n_params;
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd g(n);

  auto assemble = [&](double& cost_out) {
    h.setZero();
    g.setZero();
    double total = 0.0;
    auto add_block = [&](const Eigen::Vector2d& r, const Eigen::MatrixXd& jac,
                         const std::vector<int>& cols, double delta) {
      auto [cost, weight] = opts.use_huber ? huber(r.squaredNorm(), delta)
                                           : std::pair<double, double>{r.squaredNorm(), 1.0};
      total += cost;
      for (size_t a = 0; a < cols.size(); ++a) {
        if (cols[a] < 0) continue;
        g[cols[a]] += weight * jac.col(a).dot(r);
        for (size_t b = 0; b < cols.size(); ++b) {
          if (cols[b] < 0) continue;
          h(cols[a], cols[b]) += weight * jac.col(a).dot(jac.col(b));
        }
      }
    };

    for (int oi : point_order) {
      const auto& obs = problem.point_obs[oi];
      const auto& feat = problem.points[obs.point];
      if (obs.frame == feat.host_frame) continue;  // identically zero residual
      const Pose& host = problem.poses[feat.host_frame];
      const Pose& target = problem.poses[obs.frame];
      Eigen::Vector2d r = point_residual(host, target, feat, obs.obs);
      Eigen::Matrix<double, 2, 13> jac = point_residual_jacobian(host, target, feat, obs.obs);
      std::vector<int> cols(13);
      for (int c = 0; c < 6; ++c) cols[c] = layout.pose_idx[feat.host_frame][c];
      for (int c = 0; c < 6; ++c) cols[6 + c] = layout.pose_idx[obs.frame][c];
      cols[12] = layout.point_idx[obs.point];
      add_block(r, jac, cols, opts.huber_delta_point);
    }
    for (int oi : line_order) {
      const auto& obs = problem.line_obs[oi];
      const OrthonormalLine& line = problem.lines[obs.line];
      const Pose& cam = problem.poses[obs.frame];
      LineObservation lo{obs.frame, obs.p_s, obs.p_e};
      Eigen::Vector2d r = line_residual_signed(orthonormal_to_plucker(line), cam, lo);
      Eigen::Matrix<double, 2, 10> jac = line_residual_jacobian(line, cam, lo);
      std::vector<int> cols(10);
      for (int c = 0; c < 6; ++c) cols[c] = layout.pose_idx[obs.frame][c];
      for (int c = 0; c < 4; ++c) cols[6 + c] = layout.line_idx[obs.line][c];
      add_block(r, jac, cols, opts.huber_delta_line);
    }
    cost_out = total;
  };

  double cost = 0.0;
  assemble(cost);
  report.initial_cost = cost;
  report.iteration_costs.push_back(cost);
  double lm_lambda = opts.lm_lambda_init;
  std::string termination = "max_iterations";
  bool converged = false;

  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    double gnorm = n > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
    report.final_gradient_norm = gnorm;
    if (gnorm < opts.grad_tol) {
      converged = true;
      termination = "gradient_tolerance";
      break;
    }

    bool accepted = false;
    while (lm_lambda <= 1e12) {
      Eigen::MatrixXd damped = h;
      for (int i = 0; i < n; ++i) damped(i, i) += lm_lambda * std::max(h(i, i), 1e-12);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      Eigen::VectorXd delta = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        lm_lambda *= 10.0;
        continue;
      }
      BaProblem trial = problem;
      retract(trial, layout, delta);
      CostAccumulator trial_acc{trial, opts, point_order, line_order};
      double trial_cost;
      try {
        trial_cost = trial_acc.cost_only();
      } catch (const Error&) {
        trial_cost = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        double rel_drop = (cost - trial_cost) / std::max(cost, 1e-300);
        problem = std::move(trial);
        cost = trial_cost;
        report.iteration_costs.push_back(cost);
        lm_lambda = std::max(lm_lambda * 0.5, 1e-12);
        accepted = true;
        assemble(cost);
        if (rel_drop < opts.rel_cost_tol) {
          converged = true;
          termination = "cost_tolerance";
        }
        break;
      }
      lm_lambda *= 10.0;
    }
    if (!accepted) {
      if (!h.allFinite() || !g.allFinite())
        raise(Err::SingularNormalEquations, "normal equations contain non-finite values");
      converged = true;  // no accepted step even at max damping
      termination = "step_stalled";
      break;
    }
    if (converged) break;
  }
  report.iterations = static_cast<int>(report.iteration_costs.size()) - 1;
  report.final_cost = cost;
  report.converged = converged;
  report.termination = termination;
  report.final_gradient_norm = n > 0 ? g.cwiseAbs().maxCoeff() : 0.0;

  if (!problem.gt_poses.empty()) {
    double sum = 0.0;
    for (size_t i = 0; i < problem.poses.size(); ++i)
      sum += (problem.poses[i].t - problem.gt_poses[i].t).squaredNorm();
    report.ate = std::sqrt(sum / problem.poses.size());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Problem file format

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double to_num(const std::string& s) {
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    raise(Err::ParseError, "bad number '" + s + "'");
  }
  if (pos != s.size()) raise(Err::ParseError, "bad number '" + s + "'");
  return v;
}

}  // namespace

BaProblem load_problem(std::istream& in) {
  BaProblem p;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() == 1 &&
        (tokens[0] == "POSES" || tokens[0] == "POINTS" || tokens[0] == "LINES" ||
         tokens[0] == "POINT_OBS" || tokens[0] == "LINE_OBS" || tokens[0] == "GT")) {
      section = tokens[0];
      continue;
    }
    auto expect = [&](size_t n) {
      if (tokens.size() != n)
        raise(Err::ParseError,
              "line " + std::to_string(line_no) + ": expected " + std::to_string(n) + " fields");
    };
    if (section == "POSES") {
      expect(9);
      if (static_cast<size_t>(to_num(tokens[0])) != p.poses.size())
        raise(Err::ParseError, "pose ids must be contiguous from 0");
      Pose pose;
      pose.q = Eigen::Quaterniond(to_num(tokens[1]), to_num(tokens[2]), to_num(tokens[3]),
                                  to_num(tokens[4]))
                   .normalized();
      pose.t = {to_num(tokens[5]), to_num(tokens[6]), to_num(tokens[7])};
      const std::string& flags = tokens[8];
      if (flags.size() != 6 || flags.find_first_not_of("01") != std::string::npos)
        raise(Err::ParseError, "fixed_flags must be six 0/1 characters");
      FixedMask mask;
      for (int c = 0; c < 6; ++c) mask[c] = flags[c] == '1';
      p.poses.push_back(pose);
      p.fixed_mask.push_back(mask);
    } else if (section == "POINTS") {
      expect(6);
      if (static_cast<size_t>(to_num(tokens[0])) != p.points.size())
        raise(Err::ParseError, "point ids must be contiguous from 0");
      PointFeature f;
      f.host_frame = static_cast<int>(to_num(tokens[1]));
      f.host_bearing =
          Bearing(to_num(tokens[2]), to_num(tokens[3]), to_num(tokens[4])).normalized();
      f.lambda = to_num(tokens[5]);
      p.points.push_back(f);
    } else if (section == "LINES") {
      expect(5);
      if (static_cast<size_t>(to_num(tokens[0])) != p.lines.size())
        raise(Err::ParseError, "line ids must be contiguous from 0");
      OrthonormalLine l;
      l.psi = {to_num(tokens[1]), to_num(tokens[2]), to_num(tokens[3])};
      l.phi = to_num(tokens[4]);
      p.lines.push_back(l);
    } else if (section == "POINT_OBS") {
      expect(5);
      PointObservation o;
      o.frame = static_cast<int>(to_num(tokens[0]));
      o.point = static_cast<int>(to_num(tokens[1]));
      o.obs = Bearing(to_num(tokens[2]), to_num(tokens[3]), to_num(tokens[4])).normalized();
      p.point_obs.push_back(o);
    } else if (section == "LINE_OBS") {
      expect(8);
      LineObservationRef o;
      o.frame = static_cast<int>(to_num(tokens[0]));
      o.line = static_cast<int>(to_num(tokens[1]));
      o.p_s = Bearing(to_num(tokens[2]), to_num(tokens[3]), to_num(tokens[4])).normalized();
      o.p_e = Bearing(to_num(tokens[5]), to_num(tokens[6]), to_num(tokens[7])).normalized();
      p.line_obs.push_back(o);
    } else if (section == "GT") {
      expect(8);
      if (static_cast<size_t>(to_num(tokens[0])) != p.gt_poses.size())
        raise(Err::ParseError, "GT ids must be contiguous from 0");
      Pose pose;
      pose.q = Eigen::Quaterniond(to_num(tokens[1]), to_num(tokens[2]), to_num(tokens[3]),
                                  to_num(tokens[4]))
                   .normalized();
      pose.t = {to_num(tokens[5]), to_num(tokens[6]), to_num(tokens[7])};
      p.gt_poses.push_back(pose);
    } else {
      raise(Err::ParseError, "line " + std::to_string(line_no) + ": data before a section header");
    }
  }
  p.validate();
  return p;
}

BaProblem load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Err::IoError, "cannot open " + path);
  return load_problem(in);
}

std::string report_to_json(const SolveReport& report) {
  nlohmann::json j;
  j["iterations"] = report.iterations;
  j["initial_cost"] = report.initial_cost;
  j["final_cost"] = report.final_cost;
  j["costs"] = report.iteration_costs;
  j["termination"] = report.termination;
  j["converged"] = report.converged;
  j["final_gradient_norm"] = report.final_gradient_norm;
  if (report.ate) j["ate"] = *report.ate;
  return j.dump(2);
}

}  // namespace geoseg
