#pragma once
#include <vector>

#include "geoshape/grid.hpp"
#include "geoshape/spectral.hpp"

namespace geoshape {

struct GeodesicConfig {
  int trunc_w = 16, trunc_h = 16;
  double alpha = 3.0;
  int power = 3;
  int time_steps = 10;
  double sigma = 0.02;

  void validate(int grid_w, int grid_h) const;
  SobolevOperator make_operator(int grid_w, int grid_h) const;
};

struct EnergyTerms {
  double data = 0.0, reg = 0.0, total = 0.0;
};

// Forward Euler on d v / d t = rhs(v); returns time_steps + 1 states
// starting from the Hermitian projection of v0.
std::vector<SpectralVelocity> integrate_epdiff(const SpectralVelocity& v0,
                                               const SobolevOperator& op, int time_steps);

// Inverse-map displacement transported alongside the velocity states:
//   u_{s+1} = u_s - dt * (V_s + (Du_s) V_s),  u_0 = 0,  dt = 1/time_steps,
// where V_s is the spatial lift of state s.  Uses the first time_steps
// entries of states.
DeformationField flow_from_velocities(const std::vector<SpectralVelocity>& states,
                                      int time_steps, int grid_w, int grid_h);

DeformationField shoot_inverse_flow(const SpectralVelocity& v0, const GeodesicConfig& cfg,
                                    int grid_w, int grid_h);

// (1/sigma^2) * ssd(atlas warped by the inverse flow, target) + (L v0, v0).
EnergyTerms matching_energy(const ScalarGrid& atlas, const ScalarGrid& target,
                            const SpectralVelocity& v0, const GeodesicConfig& cfg);

namespace match_want {
constexpr unsigned kAtlasGrad = 1u;
constexpr unsigned kFlow = 2u;
constexpr unsigned kWarped = 4u;
}  // namespace match_want

struct MatchGradient {
  EnergyTerms energy;
  SpectralVelocity grad_v;
  ScalarGrid grad_atlas;   // filled iff kAtlasGrad requested
  DeformationField flow;   // filled iff kFlow requested
  ScalarGrid warped;       // filled iff kWarped requested
};

// Reverse-mode gradient of matching_energy through the discrete chain
// (Euler velocity states, transport, bilinear warp), exact for the
// discretization rather than a discretized continuous adjoint.
MatchGradient energy_gradient(const ScalarGrid& atlas, const ScalarGrid& target,
                              const SpectralVelocity& v0, const GeodesicConfig& cfg,
                              unsigned want = 0);

}  // namespace geoshape
