#include "hypmil/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hypmil/error.hpp"

namespace hypmil::lorentz {

namespace {

constexpr double kSinhcSeriesCutoff = 1e-4;

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void check_same_space(const HyperbolicPoint& u, const HyperbolicPoint& v) {
  if (u.dim() != v.dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "points of dimension " + std::to_string(u.dim()) + " and " + std::to_string(v.dim()));
  }
  if (u.curvature() != v.curvature()) throw Error(ErrorCode::kInvalidArgument, "points with different curvature");
}

}  // namespace

void GeometryConfig::validate() const {
  if (!(curvature > 0.0)) throw Error(ErrorCode::kConfig, "curvature must be positive");
  if (dim < 2) throw Error(ErrorCode::kConfig, "embedding dimension must be at least 2");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kConfig, "epsilon must be positive");
}

HyperbolicPoint::HyperbolicPoint(std::vector<double> space, double curvature)
    : space_(std::move(space)), curvature_(curvature), time_(time_from_space(space_, curvature)) {
  if (!(curvature > 0.0)) throw Error(ErrorCode::kInvalidArgument, "curvature must be positive");
}

HyperbolicPoint HyperbolicPoint::origin(std::size_t dim, double curvature) {
  return HyperbolicPoint(std::vector<double>(dim, 0.0), curvature);
}

double HyperbolicPoint::space_norm() const { return std::sqrt(dot(space_, space_)); }

double time_from_space(std::span<const double> space, double curvature) {
  return std::sqrt(1.0 / curvature + dot(space, space));
}

double lorentz_inner(const HyperbolicPoint& u, const HyperbolicPoint& v) {
  check_same_space(u, v);
  return dot(u.space(), v.space()) - u.time() * v.time();
}

HyperbolicPoint exp_map_origin(const TangentVector& x, const GeometryConfig& cfg) {
  const double t = std::sqrt(cfg.curvature) * std::sqrt(dot(x.components, x.components));
  double factor;
  if (t < kSinhcSeriesCutoff) {
    const double t2 = t * t;
    factor = 1.0 + t2 / 6.0 + t2 * t2 / 120.0;
  } else {
    factor = std::sinh(t) / t;
  }
  std::vector<double> space(x.components);
  for (auto& s : space) s *= factor;
  return HyperbolicPoint(std::move(space), cfg.curvature);
}

double geodesic(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& cfg) {
  const double arg = std::max(1.0, -cfg.curvature * lorentz_inner(u, v));
  return std::sqrt(1.0 / cfg.curvature) * std::acosh(arg);
}

double distance_from_origin(const HyperbolicPoint& u, const GeometryConfig& cfg) {
  return geodesic(HyperbolicPoint::origin(u.dim(), cfg.curvature), u, cfg);
}

double exterior_angle(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& cfg) {
  const double norm_u = u.space_norm();
  if (norm_u < cfg.epsilon) throw Error(ErrorCode::kDegenerateInput, "exterior angle at the origin");
  const double ip = cfg.curvature * lorentz_inner(u, v);
  if (std::fabs(ip) <= 1.0 + cfg.epsilon) throw Error(ErrorCode::kDegenerateInput, "exterior angle of coincident points");
  const double num = v.time() + u.time() * ip;
  const double den = norm_u * std::sqrt(ip * ip - 1.0);
  return std::acos(std::clamp(num / den, -1.0, 1.0));
}

double angle_distance(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& cfg) {
  return exterior_angle(u, v, cfg) + exterior_angle(v, u, cfg) - std::numbers::pi;
}

double half_aperture(const HyperbolicPoint& u, const GeometryConfig& cfg, double alpha) {
  const double norm_u = u.space_norm();
  if (norm_u < cfg.epsilon) throw Error(ErrorCode::kDegenerateInput, "half-aperture at the origin");
  return std::asin(std::clamp(2.0 * alpha / (std::sqrt(cfg.curvature) * norm_u), -1.0, 1.0));
}

// ---------------------------------------------------------------------------

ad::Var space_norm(ad::Var space) { return ad::sqrt(ad::sum(ad::square(space), 1)); }

ad::Var time_rows(ad::Var space, const GeometryConfig& cfg) {
  return ad::sqrt(ad::sum(ad::square(space), 1) + 1.0 / cfg.curvature);
}

ad::Var lorentz_inner(ad::Var u, ad::Var v, const GeometryConfig& cfg) {
  return ad::sum(u * v, 1) - time_rows(u, cfg) * time_rows(v, cfg);
}

ad::Var exp_map_origin(ad::Var tangent, const GeometryConfig& cfg) {
  ad::Var t = space_norm(tangent) * std::sqrt(cfg.curvature);
  return tangent * ad::sinhc(t);
}

ad::Var geodesic(ad::Var u, ad::Var v, const GeometryConfig& cfg) {
  ad::Var arg = ad::clamp_min(-cfg.curvature * lorentz_inner(u, v, cfg), 1.0);
  return ad::acosh(arg) * std::sqrt(1.0 / cfg.curvature);
}

ad::Var exterior_angle(ad::Var u, ad::Var v, const GeometryConfig& cfg) {
  ad::Var norm_u = space_norm(u);
  for (double n : norm_u.value().values()) {
    if (n < cfg.epsilon) throw Error(ErrorCode::kDegenerateInput, "exterior angle at the origin");
  }
  ad::Var ip = lorentz_inner(u, v, cfg) * cfg.curvature;
  for (double x : ip.value().values()) {
    if (std::fabs(x) <= 1.0 + cfg.epsilon) throw Error(ErrorCode::kDegenerateInput, "exterior angle of coincident points");
  }
  ad::Var num = time_rows(v, cfg) + time_rows(u, cfg) * ip;
  ad::Var den = norm_u * ad::sqrt(ad::square(ip) - 1.0);
  return ad::acos(ad::clamp(num / den, -1.0, 1.0));
}

ad::Var angle_distance(ad::Var u, ad::Var v, const GeometryConfig& cfg) {
  return exterior_angle(u, v, cfg) + exterior_angle(v, u, cfg) - std::numbers::pi;
}

ad::Var half_aperture(ad::Var u, const GeometryConfig& cfg, double alpha) {
  ad::Var norm_u = space_norm(u);
  for (double n : norm_u.value().values()) {
    if (n < cfg.epsilon) throw Error(ErrorCode::kDegenerateInput, "half-aperture at the origin");
  }
  return ad::asin(ad::clamp((2.0 * alpha / std::sqrt(cfg.curvature)) / norm_u, -1.0, 1.0));
}

}  // namespace hypmil::lorentz
