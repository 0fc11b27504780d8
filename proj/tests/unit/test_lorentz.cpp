#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hypmil/error.hpp"
#include "hypmil/lorentz.hpp"
#include "test_support.hpp"

using namespace hypmil;
using namespace hypmil::lorentz;
using hypmil::testing::random_direction;
using hypmil::testing::scaled;

namespace {

constexpr double kPi = std::numbers::pi;

GeometryConfig geo(double rho = 1.0, std::size_t k = 2) {
  GeometryConfig g;
  g.curvature = rho;
  g.dim = k;
  return g;
}

HyperbolicPoint on_axis(double norm, std::size_t k = 2, double rho = 1.0) {
  TangentVector t;
  t.components.assign(k, 0.0);
  t.components[0] = norm;
  return exp_map_origin(t, geo(rho, k));
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidArgument;
}

ad::Tensor rows_of(const std::vector<HyperbolicPoint>& pts) {
  ad::Tensor t(ad::Shape{pts.size(), pts.front().dim()});
  for (std::size_t r = 0; r < pts.size(); ++r) {
    for (std::size_t c = 0; c < pts[r].dim(); ++c) t.at(r, c) = pts[r].space()[c];
  }
  return t;
}

}  // namespace

TEST(GeometryConfig, Validation) {
  EXPECT_NO_THROW(geo().validate());
  EXPECT_EQ(code_of([] { geo(0.0).validate(); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { geo(1.0, 1).validate(); }), ErrorCode::kConfig);
}

TEST(TimeFromSpace, Examples) {
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_DOUBLE_EQ(time_from_space(zero, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(time_from_space(zero, 4.0), 0.5);
  const std::vector<double> s{3.0, 4.0};
  EXPECT_NEAR(time_from_space(s, 1.0), std::sqrt(26.0), 1e-12);
}

TEST(LorentzInner, Examples) {
  const auto o = HyperbolicPoint::origin(2, 1.0);
  EXPECT_NEAR(lorentz_inner(o, o), -1.0, 1e-15);
  const HyperbolicPoint u({1.0, 0.0}, 1.0), v({0.0, 1.0}, 1.0);
  EXPECT_NEAR(lorentz_inner(u, v), -2.0, 1e-12);
  const HyperbolicPoint w({0.3, -1.7}, 2.0);
  EXPECT_NEAR(lorentz_inner(w, w), -0.5, 1e-9);
}

TEST(LorentzInner, DimensionMismatch) {
  const HyperbolicPoint u({1.0, 0.0}, 1.0), v({0.0, 1.0, 2.0}, 1.0);
  EXPECT_EQ(code_of([&] { lorentz_inner(u, v); }), ErrorCode::kShapeMismatch);
}

TEST(HyperbolicPoint, TimeIsDerived) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (double rho : {0.5, 1.0, 2.0}) {
    for (int i = 0; i < 100; ++i) {
      const HyperbolicPoint p({n(rng), n(rng), n(rng)}, rho);
      const double expect = std::sqrt(1.0 / rho + p.space_norm() * p.space_norm());
      EXPECT_NEAR(p.time(), expect, 1e-12 * expect);
      EXPECT_NEAR(lorentz_inner(p, p), -1.0 / rho, 1e-9);
    }
  }
}

TEST(ExpMapOrigin, Examples) {
  const auto z = exp_map_origin(TangentVector{{0.0, 0.0}}, geo(2.0));
  EXPECT_EQ(z.space_norm(), 0.0);
  EXPECT_DOUBLE_EQ(z.time(), std::sqrt(0.5));

  const auto p = on_axis(1.0);
  EXPECT_NEAR(p.space_norm(), std::sinh(1.0), 1e-12);
  EXPECT_NEAR(p.time(), std::cosh(1.0), 1e-12);
  EXPECT_NEAR(p.time(), time_from_space(p.space(), 1.0), 1e-15);
}

TEST(ExpMapOrigin, SeriesBranchIsContinuous) {
  std::mt19937_64 rng(5);
  for (double rho : {0.5, 1.0, 2.0}) {
    const auto dir = random_direction(rng, 4);
    // The switch sits at sqrt(rho)|x| = 1e-4.
    const double t = 1e-4 / std::sqrt(rho);
    const auto below = exp_map_origin(scaled(dir, std::nextafter(t, 0.0)), geo(rho, 4));
    const auto above = exp_map_origin(scaled(dir, t), geo(rho, 4));
    EXPECT_NEAR(below.space_norm(), above.space_norm(), 1e-12 * above.space_norm());
    const auto oracle = hypmil::testing::oracle::exp_space(scaled(dir, t).components, rho);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(above.space()[i], static_cast<double>(oracle[i]), 1e-12 * std::fabs(static_cast<double>(oracle[i])));
    }
  }
}

TEST(ExpMapOrigin, DistanceIdentity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (double rho : {0.5, 1.0, 2.0}) {
    for (int i = 0; i < 200; ++i) {
      const double norm = u(rng);
      const auto p = exp_map_origin(scaled(random_direction(rng, 5), norm), geo(rho, 5));
      EXPECT_NEAR(geodesic(HyperbolicPoint::origin(5, rho), p, geo(rho, 5)), norm, 1e-9);
    }
  }
}

TEST(Geodesic, Examples) {
  const auto o = HyperbolicPoint::origin(2, 1.0);
  EXPECT_EQ(geodesic(o, o, geo()), 0.0);
  EXPECT_NEAR(geodesic(o, on_axis(1.5), geo()), 1.5, 1e-12);
  EXPECT_NEAR(distance_from_origin(on_axis(1.5), geo()), 1.5, 1e-12);
}

TEST(Geodesic, SymmetricNonnegativeAndZeroOnDiagonal) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.5);
  for (int i = 0; i < 500; ++i) {
    const HyperbolicPoint u({n(rng), n(rng), n(rng)}, 1.0), v({n(rng), n(rng), n(rng)}, 1.0);
    EXPECT_EQ(geodesic(u, v, geo(1.0, 3)), geodesic(v, u, geo(1.0, 3)));
    EXPECT_GE(geodesic(u, v, geo(1.0, 3)), 0.0);
    EXPECT_LT(geodesic(u, u, geo(1.0, 3)), 1e-6);
  }
}

TEST(ExteriorAngle, CollinearExamples) {
  EXPECT_NEAR(exterior_angle(on_axis(1.0), on_axis(2.0), geo()), 0.0, 1e-6);
  EXPECT_NEAR(exterior_angle(on_axis(2.0), on_axis(1.0), geo()), kPi, 1e-6);
  EXPECT_NEAR(angle_distance(on_axis(1.0), on_axis(2.0), geo()), 0.0, 1e-6);
}

TEST(ExteriorAngle, DegenerateInputs) {
  const auto o = HyperbolicPoint::origin(2, 1.0);
  EXPECT_EQ(code_of([&] { exterior_angle(o, on_axis(1.0), geo()); }), ErrorCode::kDegenerateInput);
  EXPECT_EQ(code_of([&] { exterior_angle(on_axis(1.0), on_axis(1.0), geo()); }), ErrorCode::kDegenerateInput);
}

TEST(ExteriorAngle, MatchesLawOfCosines) {
  namespace oracle = hypmil::testing::oracle;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double rho : {0.5, 2.0}) {
    for (int i = 0; i < 200; ++i) {
      const HyperbolicPoint u({n(rng), n(rng), n(rng)}, rho), v({n(rng), n(rng), n(rng)}, rho);
      std::vector<oracle::Real> us(u.space().begin(), u.space().end()), vs(v.space().begin(), v.space().end()),
          os(3, 0.0L);
      const auto d_ou = oracle::distance(os, us, rho), d_ov = oracle::distance(os, vs, rho),
                 d_uv = oracle::distance(us, vs, rho);
      if (d_ou < 0.1 || d_uv < 0.1 || d_ov < 0.1) continue;
      const double expect = static_cast<double>(oracle::exterior_angle_from_sides(d_ou, d_uv, d_ov, rho));
      const double got = exterior_angle(u, v, geo(rho, 3));
      EXPECT_NEAR(got, expect, 1e-6 * std::max(1.0, expect));
    }
  }
}

TEST(AngleDistance, SymmetricAndPositive) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const HyperbolicPoint u({n(rng), n(rng)}, 1.0), v({n(rng), n(rng)}, 1.0);
    const double a = angle_distance(u, v, geo()), b = angle_distance(v, u, geo());
    EXPECT_NEAR(a, b, 1e-12);
    EXPECT_GT(a, 0.0);
  }
}

TEST(HalfAperture, Examples) {
  const auto g = geo();
  EXPECT_NEAR(half_aperture(HyperbolicPoint({0.2, 0.0}, 1.0), g, 0.1), kPi / 2, 1e-12);
  EXPECT_NEAR(half_aperture(HyperbolicPoint({0.0, 0.4}, 1.0), g, 0.1), kPi / 6, 1e-12);
  EXPECT_GT(half_aperture(HyperbolicPoint({1e6, 0.0}, 1.0), g, 0.1), 0.0);
  EXPECT_LT(half_aperture(HyperbolicPoint({1e6, 0.0}, 1.0), g, 0.1), 1e-6);
  EXPECT_EQ(code_of([&] { half_aperture(HyperbolicPoint({0.0, 0.0}, 1.0), g, 0.1); }), ErrorCode::kDegenerateInput);
}

TEST(HalfAperture, MonotoneBeyondClamp) {
  double prev = kPi / 2 + 1;
  for (int i = 0; i < 100; ++i) {
    const double norm = 0.21 + 0.1 * i;
    const double ap = half_aperture(HyperbolicPoint({norm, 0.0}, 1.0), geo(), 0.1);
    EXPECT_LT(ap, prev);
    prev = ap;
  }
}

TEST(NoNaN, ExtremeFiniteInputs) {
  const auto g = geo(1.0, 3);
  for (double s : {1e-300, 1e-12, 1e-3, 1.0, 1e3, 1e8}) {
    const HyperbolicPoint u({s, 0.0, 0.0}, 1.0), v({0.0, s, s}, 1.0);
    EXPECT_TRUE(std::isfinite(geodesic(u, v, g)));
    if (u.space_norm() > g.epsilon) {
      EXPECT_TRUE(std::isfinite(exterior_angle(u, v, g)));
      EXPECT_TRUE(std::isfinite(half_aperture(u, g, 0.1)));
    }
  }
}

TEST(GraphVersions, AgreeWithPlain) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto g = geo(0.7, 3);
  std::vector<HyperbolicPoint> us, vs;
  for (int i = 0; i < 20; ++i) {
    us.emplace_back(std::vector<double>{n(rng), n(rng), n(rng)}, 0.7);
    vs.emplace_back(std::vector<double>{n(rng), n(rng), n(rng)}, 0.7);
  }
  ad::Graph gr;
  ad::Var u = gr.constant(rows_of(us)), v = gr.constant(rows_of(vs));
  const auto inner = lorentz_inner(u, v, g).value();
  const auto dist = geodesic(u, v, g).value();
  const auto ext = exterior_angle(u, v, g).value();
  const auto phi = angle_distance(u, v, g).value();
  const auto ap = half_aperture(u, g, 0.1).value();
  const auto t = time_rows(u, g).value();
  for (std::size_t i = 0; i < us.size(); ++i) {
    EXPECT_NEAR(inner[i], lorentz_inner(us[i], vs[i]), 1e-12);
    EXPECT_NEAR(dist[i], geodesic(us[i], vs[i], g), 1e-12);
    EXPECT_NEAR(ext[i], exterior_angle(us[i], vs[i], g), 1e-12);
    EXPECT_NEAR(phi[i], angle_distance(us[i], vs[i], g), 1e-12);
    EXPECT_NEAR(ap[i], half_aperture(us[i], g, 0.1), 1e-12);
    EXPECT_NEAR(t[i], us[i].time(), 1e-12);
  }

  ad::Tensor tangent(ad::Shape{2, 3}, {0.3, -0.1, 0.8, 0.0, 0.0, 0.0});
  const auto mapped = exp_map_origin(gr.constant(tangent), g).value();
  const auto p0 = exp_map_origin(TangentVector{{0.3, -0.1, 0.8}}, g);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(mapped.at(0, c), p0.space()[c], 1e-15);
    EXPECT_EQ(mapped.at(1, c), 0.0);
  }
}

TEST(GraphVersions, Broadcast) {
  const auto g = geo(1.0, 2);
  ad::Graph gr;
  ad::Var one = gr.constant(ad::Tensor(ad::Shape{1, 2}, {0.5, 0.2}));
  ad::Var many = gr.constant(ad::Tensor(ad::Shape{3, 2}, {1.0, 0.0, 0.0, 1.0, -0.4, 0.3}));
  const auto d = geodesic(one, many, g).value();
  EXPECT_EQ(d.shape(), (ad::Shape{3, 1}));
  EXPECT_NEAR(d[2], geodesic(HyperbolicPoint({0.5, 0.2}, 1.0), HyperbolicPoint({-0.4, 0.3}, 1.0), g), 1e-12);
}
