#include "geoseg/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace geoseg {

void CameraModel::require_in_fov(const Bearing& b) const {
  if (!in_fov(b))
    raise(Err::BearingOutOfFov, "polar angle " + std::to_string(polar_angle_deg(b)) +
                                    " deg outside band [" + std::to_string(fov_min_deg_) + ", " +
                                    std::to_string(fov_max_deg_) + "]");
}

// ---------------------------------------------------------------------------
// Equirectangular

EquirectangularCamera::EquirectangularCamera(int width, int height, double fov_min_deg,
                                             double fov_max_deg) {
  if (width <= 0 || height <= 0) raise(Err::InvalidParameter, "image size must be positive");
  width_ = width;
  height_ = height;
  set_fov(fov_min_deg, fov_max_deg);
}

PixelPoint EquirectangularCamera::project(const Bearing& b) const {
  require_in_fov(b);
  // atan2(0, 0) == 0 keeps the pole columns deterministic.
  double theta = (b.x() == 0.0 && b.y() == 0.0) ? 0.0 : std::atan2(b.y(), b.x());
  double lat = std::asin(clamp_unit(b.z()));
  double x = (theta / (2.0 * kPi) + 0.5) * width_;
  double y = (0.5 - lat / kPi) * height_;
  if (x >= width_) x -= width_;   // theta == pi lands on the seam
  if (x < 0.0) x += width_;
  return {x, y};
}

Bearing EquirectangularCamera::unproject(const PixelPoint& p) const {
  // x wraps; y spans the full [0, H] latitude range produced by project().
  if (!p.allFinite() || p.x() < -0.5 || p.x() > width_ + 0.5 || p.y() < -0.5 ||
      p.y() > height_ + 0.5)
    raise(Err::PixelOutOfDomain, "pixel outside image bounds");
  double y = std::clamp(p.y(), 0.0, double(height_));
  double theta = (p.x() / width_ - 0.5) * 2.0 * kPi;
  double lat = (0.5 - y / height_) * kPi;
  double cl = std::cos(lat);
  return Bearing(cl * std::cos(theta), cl * std::sin(theta), std::sin(lat)).normalized();
}

// ---------------------------------------------------------------------------
// Unified (MEI)

UnifiedMeiCamera::UnifiedMeiCamera(double xi, double fx, double fy, double cx, double cy,
                                   double k1, double k2, double p1, double p2, double fov_min_deg,
                                   double fov_max_deg)
    : xi_(xi), fx_(fx), fy_(fy), cx_(cx), cy_(cy), k1_(k1), k2_(k2), p1_(p1), p2_(p2) {
  if (!(fx > 0.0) || !(fy > 0.0)) raise(Err::InvalidParameter, "fx, fy must be positive");
  has_distortion_ = (k1 != 0.0 || k2 != 0.0 || p1 != 0.0 || p2 != 0.0);
  set_fov(fov_min_deg, fov_max_deg);
}

Eigen::Vector2d UnifiedMeiCamera::distort(const Eigen::Vector2d& m) const {
  double x = m.x(), y = m.y();
  double r2 = x * x + y * y;
  double radial = 1.0 + k1_ * r2 + k2_ * r2 * r2;
  double dx = 2.0 * p1_ * x * y + p2_ * (r2 + 2.0 * x * x);
  double dy = p1_ * (r2 + 2.0 * y * y) + 2.0 * p2_ * x * y;
  return {radial * x + dx, radial * y + dy};
}

Eigen::Vector2d UnifiedMeiCamera::undistort(const Eigen::Vector2d& md) const {
  // Fixed-point inversion of the radial-tangential model.
  Eigen::Vector2d u = md;
  for (int i = 0; i < 20; ++i) {
    double x = u.x(), y = u.y();
    double r2 = x * x + y * y;
    double radial = 1.0 + k1_ * r2 + k2_ * r2 * r2;
    Eigen::Vector2d tang(2.0 * p1_ * x * y + p2_ * (r2 + 2.0 * x * x),
                         p1_ * (r2 + 2.0 * y * y) + 2.0 * p2_ * x * y);
    Eigen::Vector2d next = (md - tang) / radial;
    if ((next - u).squaredNorm() < 1e-28) return next;
    u = next;
  }
  return u;
}

PixelPoint UnifiedMeiCamera::project(const Bearing& b) const {
  require_in_fov(b);
  double denom = b.z() + xi_;
  if (denom <= 1e-12) raise(Err::ProjectionSingularity, "gamma + xi below 1e-12");
  Eigen::Vector2d m(b.x() / denom, b.y() / denom);
  if (has_distortion_) m = distort(m);
  return {fx_ * m.x() + cx_, fy_ * m.y() + cy_};
}

Bearing UnifiedMeiCamera::unproject(const PixelPoint& p) const {
  if (!p.allFinite()) raise(Err::PixelOutOfDomain, "pixel not finite");
  Eigen::Vector2d m((p.x() - cx_) / fx_, (p.y() - cy_) / fy_);
  if (has_distortion_) m = undistort(m);
  double r2 = m.squaredNorm();
  double disc = 1.0 + (1.0 - xi_ * xi_) * r2;
  if (disc < 0.0) raise(Err::PixelOutOfDomain, "pixel outside the projected sphere");
  double lambda = (xi_ + std::sqrt(disc)) / (1.0 + r2);
  return Bearing(lambda * m.x(), lambda * m.y(), lambda - xi_).normalized();
}

// ---------------------------------------------------------------------------
// Scaramuzza

ScaramuzzaCamera::ScaramuzzaCamera(const std::array<double, 5>& poly, double cx, double cy,
                                   double c, double d, double e, int width, int height,
                                   double fov_min_deg, double fov_max_deg)
    : a_(poly), cx_(cx), cy_(cy), c_(c), d_(d), e_(e) {
  if (a_[0] == 0.0) raise(Err::InvalidParameter, "a0 must be nonzero");
  if (width <= 0 || height <= 0) raise(Err::InvalidParameter, "image size must be positive");
  double det = c_ - d_ * e_;
  if (std::abs(det) < 1e-12) raise(Err::InvalidParameter, "affine matrix is singular");
  inv_det_ = 1.0 / det;
  width_ = width;
  height_ = height;
  set_fov(fov_min_deg, fov_max_deg);
}

double ScaramuzzaCamera::poly(double rho) const {
  return a_[0] + rho * (a_[1] + rho * (a_[2] + rho * (a_[3] + rho * a_[4])));
}

double ScaramuzzaCamera::poly_deriv(double rho) const {
  return a_[1] + rho * (2.0 * a_[2] + rho * (3.0 * a_[3] + rho * 4.0 * a_[4]));
}

PixelPoint ScaramuzzaCamera::project(const Bearing& b) const {
  require_in_fov(b);
  double rxy = std::hypot(b.x(), b.y());
  if (rxy < 1e-14) {
    if (b.z() * a_[0] <= 0.0)
      raise(Err::ProjectionSingularity, "on-axis bearing opposite the polynomial axis");
    return {cx_, cy_};
  }
  // Solve h(rho) = rxy * poly(rho) - gamma * rho = 0 on rho >= 0: the sensor
  // point (rho, poly(rho)) must be parallel to (rxy, gamma).
  auto h = [&](double rho) { return rxy * poly(rho) - b.z() * rho; };
  double lo = 0.0, hi = std::hypot(width_, height_);
  double h_lo = h(lo);
  int expand = 0;
  while (h_lo * h(hi) > 0.0) {
    hi *= 2.0;
    if (++expand > 8) raise(Err::ProjectionSingularity, "radial root not bracketed");
  }
  double polar = std::acos(clamp_unit(b.z()));
  double rho = std::abs(a_[0]) * polar;  // linear-in-angle seed
  if (rho <= lo || rho >= hi) rho = 0.5 * (lo + hi);
  double hv = h(rho);
  for (int it = 0; it < 50; ++it) {
    if (std::abs(hv) <= 1e-10 * std::max(1.0, rho)) break;
    if (hv * h_lo > 0.0) lo = rho; else hi = rho;
    double deriv = rxy * poly_deriv(rho) - b.z();
    double next = rho - hv / deriv;
    if (!(std::isfinite(next)) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    rho = next;
    hv = h(rho);
    if (it == 49 && std::abs(hv) > 1e-10 * std::max(1.0, rho))
      raise(Err::ProjectionSingularity, "radial Newton iteration did not converge");
  }
  double sx = rho * b.x() / rxy, sy = rho * b.y() / rxy;
  return {c_ * sx + d_ * sy + cx_, e_ * sx + sy + cy_};
}

Bearing ScaramuzzaCamera::unproject(const PixelPoint& p) const {
  if (!p.allFinite() || p.x() < -0.5 || p.x() > width_ - 0.5 || p.y() < -0.5 ||
      p.y() > height_ - 0.5)
    raise(Err::PixelOutOfDomain, "pixel outside image bounds");
  double ux = p.x() - cx_, uy = p.y() - cy_;
  double sx = inv_det_ * (ux - d_ * uy);
  double sy = inv_det_ * (-e_ * ux + c_ * uy);
  double rho = std::hypot(sx, sy);
  return Bearing(sx, sy, poly(rho)).normalized();
}

// ---------------------------------------------------------------------------
// Pinhole

PinholeCamera::PinholeCamera(double fx, double fy, double cx, double cy, double fov_min_deg,
                             double fov_max_deg)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy) {
  if (!(fx > 0.0) || !(fy > 0.0)) raise(Err::InvalidParameter, "fx, fy must be positive");
  set_fov(fov_min_deg, fov_max_deg);
}

PixelPoint PinholeCamera::project(const Bearing& b) const {
  require_in_fov(b);
  if (b.z() <= 1e-12) raise(Err::ProjectionSingularity, "bearing on or behind the z=0 plane");
  return {fx_ * b.x() / b.z() + cx_, fy_ * b.y() / b.z() + cy_};
}

Bearing PinholeCamera::unproject(const PixelPoint& p) const {
  if (!p.allFinite()) raise(Err::PixelOutOfDomain, "pixel not finite");
  return Bearing((p.x() - cx_) / fx_, (p.y() - cy_) / fy_, 1.0).normalized();
}

// ---------------------------------------------------------------------------
// Validity predicates

bool is_valid_bearing(const CameraModel& model, const Bearing& b) { return model.in_fov(b); }

bool is_valid_pixel(const CameraModel& model, const PixelPoint& p) {
  try {
    return model.in_fov(model.unproject(p));
  } catch (const Error&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

using nlohmann::json;

double get_num(const json& j, const char* key) {
  if (!j.contains(key)) raise(Err::ParseError, std::string("missing key \"") + key + "\"");
  if (!j.at(key).is_number()) raise(Err::ParseError, std::string("key \"") + key + "\" must be a number");
  return j.at(key).get<double>();
}

double get_num_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) raise(Err::ParseError, std::string("key \"") + key + "\" must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const char* key) {
  double v = get_num(j, key);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) raise(Err::ParseError, std::string("key \"") + key + "\" must be an integer");
  return i;
}

std::pair<double, double> get_fov(const json& j, double def_min, double def_max) {
  if (!j.contains("fov_deg")) return {def_min, def_max};
  const auto& f = j.at("fov_deg");
  if (!f.is_array() || f.size() != 2 || !f[0].is_number() || !f[1].is_number())
    raise(Err::ParseError, "fov_deg must be [min, max]");
  return {f[0].get<double>(), f[1].get<double>()};
}

}  // namespace

std::unique_ptr<CameraModel> load_model(const std::string& config_text) {
  json j;
  try {
    j = json::parse(config_text);
  } catch (const json::exception& e) {
    raise(Err::ParseError, e.what());
  }
  if (!j.is_object() || !j.contains("model") || !j.at("model").is_string())
    raise(Err::ParseError, "missing \"model\" key");
  const std::string model = j.at("model").get<std::string>();

  if (model == "equirectangular") {
    auto [fmin, fmax] = get_fov(j, 0.0, 180.0);
    return std::make_unique<EquirectangularCamera>(get_int(j, "width"), get_int(j, "height"),
                                                   fmin, fmax);
  }
  if (model == "mei" || model == "unified_mei") {
    auto [fmin, fmax] = get_fov(j, 0.0, 120.0);
    return std::make_unique<UnifiedMeiCamera>(
        get_num(j, "xi"), get_num(j, "fx"), get_num(j, "fy"), get_num(j, "cx"), get_num(j, "cy"),
        get_num_or(j, "k1", 0.0), get_num_or(j, "k2", 0.0), get_num_or(j, "p1", 0.0),
        get_num_or(j, "p2", 0.0), fmin, fmax);
  }
  if (model == "scaramuzza") {
    if (!j.contains("a") || !j.at("a").is_array() || j.at("a").size() != 5)
      raise(Err::ParseError, "scaramuzza needs \"a\": [a0..a4]");
    std::array<double, 5> a{};
    for (int i = 0; i < 5; ++i) {
      if (!j.at("a")[i].is_number()) raise(Err::ParseError, "polynomial entries must be numbers");
      a[i] = j.at("a")[i].get<double>();
    }
    auto [fmin, fmax] = get_fov(j, 0.0, 120.0);
    return std::make_unique<ScaramuzzaCamera>(a, get_num(j, "cx"), get_num(j, "cy"),
                                              get_num_or(j, "c", 1.0), get_num_or(j, "d", 0.0),
                                              get_num_or(j, "e", 0.0), get_int(j, "width"),
                                              get_int(j, "height"), fmin, fmax);
  }
  if (model == "pinhole") {
    auto [fmin, fmax] = get_fov(j, 0.0, 180.0);
    return std::make_unique<PinholeCamera>(get_num(j, "fx"), get_num(j, "fy"), get_num(j, "cx"),
                                           get_num(j, "cy"), fmin, fmax);
  }
  raise(Err::ParseError, "unknown model \"" + model + "\"");
}

std::unique_ptr<CameraModel> load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Err::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

}  // namespace geoseg
