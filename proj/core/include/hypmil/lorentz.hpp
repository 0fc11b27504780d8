#pragma once

// Lorentz-model hyperbolic geometry with curvature -rho.
//
// Points are stored by their space component only; the time component is
// always derived as sqrt(1/rho + |space|^2), so every point satisfies the
// manifold constraint <u,u>_H = -1/rho by construction. Each formula comes
// in two flavours: plain functions on HyperbolicPoint, and graph versions on
// ad::Var that operate row-wise on [N x k] space tensors (with numpy-style
// broadcasting between the two operands) for use inside training.

#include <cstddef>
#include <span>
#include <vector>

#include "hypmil/autodiff.hpp"

namespace hypmil::lorentz {

struct GeometryConfig {
  double curvature = 1.0;
  std::size_t dim = 16;
  double epsilon = 1e-8;

  void validate() const;
};

struct TangentVector {
  std::vector<double> components;
};

class HyperbolicPoint {
 public:
  HyperbolicPoint(std::vector<double> space, double curvature);

  static HyperbolicPoint origin(std::size_t dim, double curvature);

  std::span<const double> space() const noexcept { return space_; }
  double time() const noexcept { return time_; }
  double curvature() const noexcept { return curvature_; }
  std::size_t dim() const noexcept { return space_.size(); }
  double space_norm() const;

 private:
  std::vector<double> space_;
  double curvature_;
  double time_;
};

double time_from_space(std::span<const double> space, double curvature);
double lorentz_inner(const HyperbolicPoint& u, const HyperbolicPoint& v);
HyperbolicPoint exp_map_origin(const TangentVector& x, const GeometryConfig& cfg);
double geodesic(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& cfg);
double distance_from_origin(const HyperbolicPoint& u, const GeometryConfig& cfg);

// Exterior angle at u of the geodesic triangle (O, u, v): pi minus the
// interior angle at u. Throws kDegenerateInput when u is at the origin or
// u and v coincide (within cfg.epsilon).
double exterior_angle(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& cfg);

// theta(u, v) + theta(v, u) - pi. Nonnegative: it equals the angle at O plus
// the angular defect of the triangle.
double angle_distance(const HyperbolicPoint& u, const HyperbolicPoint& v, const GeometryConfig& cfg);

// Entailment-cone half-aperture asin(2 alpha / (sqrt(rho) |u_s|)); the
// argument is clamped to 1, giving pi/2 near the origin.
double half_aperture(const HyperbolicPoint& u, const GeometryConfig& cfg, double alpha);

// --- graph versions; all return [N x 1] columns ---------------------------

ad::Var space_norm(ad::Var space);
ad::Var time_rows(ad::Var space, const GeometryConfig& cfg);
ad::Var lorentz_inner(ad::Var u, ad::Var v, const GeometryConfig& cfg);
// Maps [N x k] tangent rows to [N x k] space rows.
ad::Var exp_map_origin(ad::Var tangent, const GeometryConfig& cfg);
ad::Var geodesic(ad::Var u, ad::Var v, const GeometryConfig& cfg);
ad::Var exterior_angle(ad::Var u, ad::Var v, const GeometryConfig& cfg);
ad::Var angle_distance(ad::Var u, ad::Var v, const GeometryConfig& cfg);
ad::Var half_aperture(ad::Var u, const GeometryConfig& cfg, double alpha);

}  // namespace hypmil::lorentz
