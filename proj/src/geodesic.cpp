#include "geoshape/geodesic.hpp"

#include <cmath>

namespace geoshape {

void GeodesicConfig::validate(int grid_w, int grid_h) const {
  if (trunc_w < 3 || trunc_h < 3) throw ConfigError("geodesic: truncation must be >= 3");
  if (trunc_w > grid_w || trunc_h > grid_h)
    throw ConfigError("geodesic: truncation exceeds grid extent");
  if (time_steps < 1) throw ConfigError("geodesic: time_steps must be >= 1");
  if (sigma <= 0.0) throw ConfigError("geodesic: sigma must be positive");
}

SobolevOperator GeodesicConfig::make_operator(int grid_w, int grid_h) const {
  validate(grid_w, grid_h);
  return SobolevOperator(alpha, power, grid_w, grid_h);
}

std::vector<SpectralVelocity> integrate_epdiff(const SpectralVelocity& v0,
                                               const SobolevOperator& op, int time_steps) {
  if (time_steps < 1) throw ContractViolation("integrate_epdiff: time_steps must be >= 1");
  const double dt = 1.0 / time_steps;
  std::vector<SpectralVelocity> states;
  states.reserve(time_steps + 1);
  SpectralVelocity v = v0;
  hermitian_project(v);
  states.push_back(v);
  for (int s = 0; s < time_steps; ++s) {
    SpectralVelocity r = epdiff_rhs(states.back(), op);
    SpectralVelocity next = states.back();
    axpy(next, dt, r);
    if (!all_finite(next))
      throw DivergenceError("velocity integration produced non-finite values", s);
    states.push_back(std::move(next));
  }
  return states;
}

DeformationField flow_from_velocities(const std::vector<SpectralVelocity>& states,
                                      int time_steps, int grid_w, int grid_h) {
  if (static_cast<int>(states.size()) < time_steps)
    throw ContractViolation("flow_from_velocities: not enough states");
  const double dt = 1.0 / time_steps;
  VectorGrid u(grid_w, grid_h, 0.0);
  for (int s = 0; s < time_steps; ++s) {
    VectorGrid V = to_spatial(states[s], grid_w, grid_h);
    VectorGrid adv = jacobian_times(u, V);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(u.size()); ++i) {
      u.x[i] -= dt * (V.x[i] + adv.x[i]);
      u.y[i] -= dt * (V.y[i] + adv.y[i]);
    }
    if (!all_finite(u)) throw DivergenceError("flow transport produced non-finite values", s);
  }
  return DeformationField(std::move(u));
}

DeformationField shoot_inverse_flow(const SpectralVelocity& v0, const GeodesicConfig& cfg,
                                    int grid_w, int grid_h) {
  SobolevOperator op = cfg.make_operator(grid_w, grid_h);
  auto states = integrate_epdiff(v0, op, cfg.time_steps);
  return flow_from_velocities(states, cfg.time_steps, grid_w, grid_h);
}

EnergyTerms matching_energy(const ScalarGrid& atlas, const ScalarGrid& target,
                            const SpectralVelocity& v0, const GeodesicConfig& cfg) {
  if (!atlas.same_shape(target)) throw ContractViolation("matching_energy: shape mismatch");
  SobolevOperator op = cfg.make_operator(atlas.width, atlas.height);
  auto states = integrate_epdiff(v0, op, cfg.time_steps);
  DeformationField flow = flow_from_velocities(states, cfg.time_steps, atlas.width, atlas.height);
  ScalarGrid warped = warp(atlas, flow);
  EnergyTerms e;
  e.data = sum_squared_diff(warped, target) / (cfg.sigma * cfg.sigma);
  e.reg = kinetic_energy(states.front(), op);
  e.total = e.data + e.reg;
  if (!std::isfinite(e.total))
    throw DivergenceError("matching energy is non-finite", cfg.time_steps);
  return e;
}

MatchGradient energy_gradient(const ScalarGrid& atlas, const ScalarGrid& target,
                              const SpectralVelocity& v0, const GeodesicConfig& cfg,
                              unsigned want) {
  if (!atlas.same_shape(target)) throw ContractViolation("energy_gradient: shape mismatch");
  const int W = atlas.width, H = atlas.height;
  const int T = cfg.time_steps;
  const double dt = 1.0 / T;
  SobolevOperator op = cfg.make_operator(W, H);

  auto states = integrate_epdiff(v0, op, T);

  // Transport forward, keeping every u_s and spatial V_s for the sweep back.
  std::vector<VectorGrid> u(T + 1), V(T);
  u[0] = VectorGrid(W, H, 0.0);
  for (int s = 0; s < T; ++s) {
    V[s] = to_spatial(states[s], W, H);
    VectorGrid adv = jacobian_times(u[s], V[s]);
    u[s + 1] = u[s];
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(u[s + 1].size()); ++i) {
      u[s + 1].x[i] -= dt * (V[s].x[i] + adv.x[i]);
      u[s + 1].y[i] -= dt * (V[s].y[i] + adv.y[i]);
    }
    if (!all_finite(u[s + 1]))
      throw DivergenceError("flow transport produced non-finite values", s);
  }

  DeformationField flow(std::move(u[T]));
  ScalarGrid warped = warp(atlas, flow);
  ScalarGrid residual(W, H);
  const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(residual.size()); ++i)
    residual.data[i] = warped.data[i] - target.data[i];

  MatchGradient out;
  out.energy.data = inv_s2 * dot(residual, residual);
  out.energy.reg = kinetic_energy(states.front(), op);
  out.energy.total = out.energy.data + out.energy.reg;
  if (!std::isfinite(out.energy.total))
    throw DivergenceError("matching energy is non-finite", T);

  ScalarGrid r(W, H);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(r.size()); ++i)
    r.data[i] = 2.0 * inv_s2 * residual.data[i];

  if (want & match_want::kAtlasGrad) out.grad_atlas = splat(r, flow);

  // Backward through the warp and the transport recursion.
  VectorGrid ubar = warp_position_gradient(atlas, flow, r);
  std::vector<SpectralVelocity> vbar_tr(T);
  for (int s = T - 1; s >= 0; --s) {
    VectorGrid jt = jacobian_transpose_times(u[s], ubar);
    VectorGrid Vbar(W, H);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(Vbar.size()); ++i) {
      Vbar.x[i] = -dt * (ubar.x[i] + jt.x[i]);
      Vbar.y[i] = -dt * (ubar.y[i] + jt.y[i]);
    }
    vbar_tr[s] = to_spatial_adjoint(Vbar, cfg.trunc_w, cfg.trunc_h);
    VectorGrid back = jacobian_times_adjoint_u(ubar, V[s]);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(ubar.size()); ++i) {
      ubar.x[i] -= dt * back.x[i];
      ubar.y[i] -= dt * back.y[i];
    }
  }

  // Backward through the Euler velocity chain.
  SpectralVelocity wtil(cfg.trunc_w, cfg.trunc_h);
  for (int s = T - 1; s >= 0; --s) {
    SpectralVelocity adj = epdiff_rhs_adjoint(states[s], wtil, op);
    axpy(wtil, dt, adj);
    axpy(wtil, 1.0, vbar_tr[s]);
  }

  SpectralVelocity grad = wtil;
  SpectralVelocity reg_grad = apply_sobolev(states.front(), op, false);
  axpy(grad, 2.0, reg_grad);
  hermitian_project(grad);
  out.grad_v = std::move(grad);

  if (want & match_want::kWarped) out.warped = std::move(warped);
  if (want & match_want::kFlow) out.flow = std::move(flow);
  return out;
}

}  // namespace geoshape
