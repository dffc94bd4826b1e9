#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "geoshape/errors.hpp"
#include "geoshape/geodesic.hpp"
#include "geoshape/rng.hpp"

using namespace geoshape;

namespace {

ScalarGrid smooth_image(int w, int h, double phase) {
  ScalarGrid g(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      g.at(x, y) = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * x / w + phase) *
                             std::cos(2.0 * std::numbers::pi * y / h - 0.5 * phase);
  return g;
}

SpectralVelocity random_hermitian(int tw, int th, std::uint64_t salt, double scale) {
  auto eng = make_engine(555, rng_stream::kTest, salt);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SpectralVelocity v(tw, th);
  for (auto& z : v.x.c) z = scale * std::complex<double>(u(eng), u(eng));
  for (auto& z : v.y.c) z = scale * std::complex<double>(u(eng), u(eng));
  hermitian_project(v);
  return v;
}

// Straight-line re-statements of the documented discretization, written
// against raw arrays rather than the grid module's kernels.
double oracle_diff(const std::vector<double>& f, int w, int h, int x, int y, int axis) {
  if (axis == 0) {
    if (x == 0) return f[static_cast<std::size_t>(y) * w + 1] - f[static_cast<std::size_t>(y) * w];
    if (x == w - 1)
      return f[static_cast<std::size_t>(y) * w + w - 1] - f[static_cast<std::size_t>(y) * w + w - 2];
    return 0.5 * (f[static_cast<std::size_t>(y) * w + x + 1] -
                  f[static_cast<std::size_t>(y) * w + x - 1]);
  }
  if (y == 0) return f[static_cast<std::size_t>(w) + x] - f[x];
  if (y == h - 1)
    return f[static_cast<std::size_t>(h - 1) * w + x] - f[static_cast<std::size_t>(h - 2) * w + x];
  return 0.5 * (f[static_cast<std::size_t>(y + 1) * w + x] -
                f[static_cast<std::size_t>(y - 1) * w + x]);
}

VectorGrid oracle_transport(const std::vector<SpectralVelocity>& states, int time_steps, int w,
                            int h) {
  VectorGrid u(w, h);
  double dt = 1.0 / time_steps;
  for (int s = 0; s < time_steps; ++s) {
    VectorGrid V = to_spatial(states[static_cast<std::size_t>(s)], w, h);
    VectorGrid next(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::size_t i = static_cast<std::size_t>(y) * w + x;
        double ax = oracle_diff(u.x, w, h, x, y, 0) * V.x[i] +
                    oracle_diff(u.x, w, h, x, y, 1) * V.y[i];
        double ay = oracle_diff(u.y, w, h, x, y, 0) * V.x[i] +
                    oracle_diff(u.y, w, h, x, y, 1) * V.y[i];
        next.x[i] = u.x[i] - dt * (V.x[i] + ax);
        next.y[i] = u.y[i] - dt * (V.y[i] + ay);
      }
    u = std::move(next);
  }
  return u;
}

double oracle_sample(const ScalarGrid& img, double sx, double sy) {
  int w = img.width, h = img.height;
  double cx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  double cy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  int x0 = std::min(static_cast<int>(std::floor(cx)), w - 2);
  int y0 = std::min(static_cast<int>(std::floor(cy)), h - 2);
  double fx = cx - x0, fy = cy - y0;
  double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x0 + 1, y0);
  double bot = (1.0 - fx) * img.at(x0, y0 + 1) + fx * img.at(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bot;
}

EnergyTerms oracle_energy(const ScalarGrid& atlas, const ScalarGrid& target,
                          const SpectralVelocity& v0, const GeodesicConfig& cfg) {
  SobolevOperator op = cfg.make_operator(atlas.width, atlas.height);
  SpectralVelocity v = v0;
  hermitian_project(v);
  std::vector<SpectralVelocity> states{v};
  double dt = 1.0 / cfg.time_steps;
  for (int s = 0; s < cfg.time_steps; ++s) {
    SpectralVelocity next = states.back();
    axpy(next, dt, epdiff_rhs(states.back(), op));
    states.push_back(std::move(next));
  }
  VectorGrid u = oracle_transport(states, cfg.time_steps, atlas.width, atlas.height);
  double ssd = 0.0;
  for (int y = 0; y < atlas.height; ++y)
    for (int x = 0; x < atlas.width; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * atlas.width + x;
      double wv = oracle_sample(atlas, x + u.x[i], y + u.y[i]);
      double d = wv - target.data[i];
      ssd += d * d;
    }
  EnergyTerms e;
  e.data = ssd / (cfg.sigma * cfg.sigma);
  e.reg = kinetic_energy(v, op);
  e.total = e.data + e.reg;
  return e;
}

}  // namespace

TEST_CASE("config contracts") {
  GeodesicConfig cfg;
  cfg.trunc_w = 8;
  cfg.trunc_h = 8;
  CHECK_NOTHROW(cfg.validate(16, 16));
  GeodesicConfig bad = cfg;
  bad.trunc_w = 2;
  CHECK_THROWS_AS(bad.validate(16, 16), ConfigError);
  bad = cfg;
  bad.trunc_h = 32;
  CHECK_THROWS_AS(bad.validate(16, 16), ConfigError);
  bad = cfg;
  bad.time_steps = 0;
  CHECK_THROWS_AS(bad.validate(16, 16), ConfigError);
  bad = cfg;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(16, 16), ConfigError);
}

TEST_CASE("integration starts from the projection and steps explicitly") {
  const int tw = 6, th = 6;
  SobolevOperator op(3.0, 3, 16, 16);
  auto eng = make_engine(555, rng_stream::kTest, 1);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  SpectralVelocity raw(tw, th);  // deliberately not symmetric
  for (auto& z : raw.x.c) z = std::complex<double>(u(eng), u(eng));
  for (auto& z : raw.y.c) z = std::complex<double>(u(eng), u(eng));

  const int T = 5;
  auto states = integrate_epdiff(raw, op, T);
  REQUIRE(states.size() == static_cast<std::size_t>(T + 1));

  SpectralVelocity proj = raw;
  hermitian_project(proj);
  CHECK(max_abs_diff(states[0], proj) == 0.0);

  double dt = 1.0 / T;
  for (int s = 0; s < T; ++s) {
    CHECK(hermitian_max_asymmetry(states[static_cast<std::size_t>(s)].x) < 1e-13);
    SpectralVelocity pred = states[static_cast<std::size_t>(s)];
    axpy(pred, dt, epdiff_rhs(states[static_cast<std::size_t>(s)], op));
    CHECK(max_abs_diff(states[static_cast<std::size_t>(s) + 1], pred) < 1e-14);
  }
}

TEST_CASE("constant velocity shoots to an exact constant displacement") {
  // A pure zero-frequency field is a fixed point of the momentum equation,
  // and the transported inverse map accumulates exactly -v per unit time:
  // spatial derivatives of every intermediate field vanish identically.
  const int W = 20, H = 14;
  GeodesicConfig cfg;
  cfg.trunc_w = 6;
  cfg.trunc_h = 6;
  cfg.time_steps = 7;
  SpectralVelocity v0(6, 6);
  const double cx = 1.25, cy = -0.75;
  v0.x.at(slot_of(0, 6), slot_of(0, 6)) = cx;
  v0.y.at(slot_of(0, 6), slot_of(0, 6)) = cy;

  DeformationField def = shoot_inverse_flow(v0, cfg, W, H);
  for (std::size_t i = 0; i < def.displacement.x.size(); ++i) {
    CHECK(def.displacement.x[i] == doctest::Approx(-cx).epsilon(1e-12));
    CHECK(def.displacement.y[i] == doctest::Approx(-cy).epsilon(1e-12));
  }
}

TEST_CASE("transport matches the straight-line stencil oracle") {
  const int W = 16, H = 12;
  SobolevOperator op(3.0, 3, W, H);
  SpectralVelocity v0 = random_hermitian(6, 5, 10, 0.4);
  const int T = 6;
  auto states = integrate_epdiff(v0, op, T);
  DeformationField def = flow_from_velocities(states, T, W, H);
  VectorGrid want = oracle_transport(states, T, W, H);
  CHECK(max_abs_diff(def.displacement, want) < 1e-13);
}

TEST_CASE("matching energy agrees with the straight-line oracle") {
  const int W = 16, H = 16;
  GeodesicConfig cfg;
  cfg.trunc_w = 6;
  cfg.trunc_h = 6;
  cfg.time_steps = 4;
  cfg.sigma = 0.1;
  ScalarGrid atlas = smooth_image(W, H, 0.0);
  ScalarGrid target = smooth_image(W, H, 0.9);
  SpectralVelocity v0 = random_hermitian(6, 6, 20, 0.3);

  EnergyTerms got = matching_energy(atlas, target, v0, cfg);
  EnergyTerms want = oracle_energy(atlas, target, v0, cfg);
  CHECK(got.data == doctest::Approx(want.data).epsilon(1e-12));
  CHECK(got.reg == doctest::Approx(want.reg).epsilon(1e-12));
  CHECK(got.total == doctest::Approx(got.data + got.reg).epsilon(1e-15));
}

TEST_CASE("zero velocity leaves only the data term") {
  const int W = 12, H = 12;
  GeodesicConfig cfg;
  cfg.trunc_w = 4;
  cfg.trunc_h = 4;
  cfg.sigma = 0.2;
  ScalarGrid atlas = smooth_image(W, H, 0.0);
  ScalarGrid target = smooth_image(W, H, 1.3);
  EnergyTerms e = matching_energy(atlas, target, SpectralVelocity(4, 4), cfg);
  CHECK(e.reg == 0.0);
  CHECK(e.data == doctest::Approx(sum_squared_diff(atlas, target) / (0.2 * 0.2))
                      .epsilon(1e-15));
}

TEST_CASE("velocity gradient matches central differences") {
  const int W = 16, H = 16, tw = 6, th = 6;
  GeodesicConfig cfg;
  cfg.trunc_w = tw;
  cfg.trunc_h = th;
  cfg.time_steps = 4;
  cfg.sigma = 0.1;
  ScalarGrid atlas = smooth_image(W, H, 0.0);
  ScalarGrid target = smooth_image(W, H, 0.9);
  SpectralVelocity v0 = random_hermitian(tw, th, 30, 0.2);

  MatchGradient g = energy_gradient(atlas, target, v0, cfg);
  CHECK(hermitian_max_asymmetry(g.grad_v.x) < 1e-12);
  CHECK(hermitian_max_asymmetry(g.grad_v.y) < 1e-12);

  const double eps = 1e-5;
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    SpectralVelocity h = random_hermitian(tw, th, 31 + trial, 1.0);
    SpectralVelocity vp = v0, vm = v0;
    axpy(vp, eps, h);
    axpy(vm, -eps, h);
    double fd = (matching_energy(atlas, target, vp, cfg).total -
                 matching_energy(atlas, target, vm, cfg).total) /
                (2.0 * eps);
    CHECK(fd == doctest::Approx(dot(g.grad_v, h)).epsilon(5e-6));
  }
}

TEST_CASE("atlas gradient is exact for the quadratic data term") {
  const int W = 14, H = 14, tw = 5, th = 5;
  GeodesicConfig cfg;
  cfg.trunc_w = tw;
  cfg.trunc_h = th;
  cfg.time_steps = 3;
  cfg.sigma = 0.15;
  ScalarGrid atlas = smooth_image(W, H, 0.2);
  ScalarGrid target = smooth_image(W, H, 1.1);
  SpectralVelocity v0 = random_hermitian(tw, th, 40, 0.25);

  MatchGradient g = energy_gradient(atlas, target, v0, cfg, match_want::kAtlasGrad);
  REQUIRE(g.grad_atlas.width == W);

  // The energy is quadratic in the image, so one central difference with a
  // large step is already exact up to roundoff.
  auto eng = make_engine(555, rng_stream::kTest, 41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarGrid rho(W, H);
  for (auto& p : rho.data) p = u(eng);
  const double eps = 0.5;
  ScalarGrid ap = atlas, am = atlas;
  for (std::size_t i = 0; i < ap.data.size(); ++i) {
    ap.data[i] += eps * rho.data[i];
    am.data[i] -= eps * rho.data[i];
  }
  double fd = (matching_energy(ap, target, v0, cfg).total -
               matching_energy(am, target, v0, cfg).total) /
              (2.0 * eps);
  CHECK(fd == doctest::Approx(dot(g.grad_atlas, rho)).epsilon(1e-10));
}

TEST_CASE("gradient evaluation reports the same energy and optional products") {
  const int W = 12, H = 12, tw = 4, th = 4;
  GeodesicConfig cfg;
  cfg.trunc_w = tw;
  cfg.trunc_h = th;
  cfg.time_steps = 3;
  ScalarGrid atlas = smooth_image(W, H, 0.0);
  ScalarGrid target = smooth_image(W, H, 0.7);
  SpectralVelocity v0 = random_hermitian(tw, th, 50, 0.3);

  EnergyTerms e = matching_energy(atlas, target, v0, cfg);
  MatchGradient g = energy_gradient(atlas, target, v0, cfg,
                                    match_want::kFlow | match_want::kWarped);
  CHECK(g.energy.total == doctest::Approx(e.total).epsilon(1e-15));
  CHECK(g.energy.data == doctest::Approx(e.data).epsilon(1e-15));

  DeformationField def = shoot_inverse_flow(v0, cfg, W, H);
  REQUIRE(g.flow.width() == W);
  CHECK(max_abs_diff(g.flow.displacement, def.displacement) == 0.0);
  REQUIRE(g.warped.width == W);
  CHECK(max_abs_diff(g.warped, warp(atlas, def)) == 0.0);

  MatchGradient lean = energy_gradient(atlas, target, v0, cfg);
  CHECK(lean.grad_atlas.width == 0);
  CHECK(lean.flow.width() == 0);
  CHECK(lean.warped.width == 0);
}

TEST_CASE("blow-up surfaces as a divergence error with the failing step") {
  const int tw = 6, th = 6;
  SobolevOperator op(3.0, 3, 16, 16);
  SpectralVelocity v0 = random_hermitian(tw, th, 60, 1e8);
  try {
    integrate_epdiff(v0, op, 10);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step_index >= 0);
    CHECK(exit_code_for(e) == 3);
  }
}
