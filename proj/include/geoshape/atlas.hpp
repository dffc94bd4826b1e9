#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geoshape/geodesic.hpp"

namespace geoshape {

struct AtlasConfig {
  GeodesicConfig geodesic;
  int outer_iters = 50;
  int velocity_steps = 5;
  int atlas_steps = 1;
  double velocity_step_size = 1e-5;
  double atlas_step_size = 1e-4;
  double early_stop_rel = 1e-6;
  int early_stop_patience = 3;
  int max_halvings = 10;

  void validate() const;
};

struct EnergyRow {
  double data = 0.0, reg = 0.0, total = 0.0;
};

struct AtlasModel {
  ScalarGrid atlas;
  std::vector<SpectralVelocity> velocities;  // one per input image, input order
  std::vector<EnergyRow> energy_history;     // one row per outer iteration
};

struct RegistrationResult {
  SpectralVelocity velocity;
  std::vector<double> trace;  // energy before the first step, then after each accepted step
  double last_step_size = 0.0;
  EnergyTerms final_energy;
};

// Gradient descent on the matching energy over the initial velocity, with a
// backtracking line search (step halved until the energy decreases, at most
// max_halvings times; the step is not taken if no decrease is found).
RegistrationResult register_image(const ScalarGrid& atlas, const ScalarGrid& target,
                                  const SpectralVelocity& init, int steps, double step_size,
                                  const GeodesicConfig& cfg, int max_halvings = 10);

// Alternating minimization of sum_i E(atlas, v_i; image_i): a few velocity
// steps per image, then projected-gradient atlas update(s) (intensities are
// nonnegative, so candidates are clamped at zero before the backtracking
// line search evaluates them) reusing each image's cached flow.  All
// cross-image reductions are performed in sorted order, so the result is
// invariant to a permutation of the inputs.
AtlasModel build_atlas(const std::vector<ScalarGrid>& images, const AtlasConfig& cfg,
                       const ScalarGrid* init_atlas = nullptr,
                       const std::vector<SpectralVelocity>* init_velocities = nullptr);

// Mean coefficient of variation (sample std dev / mean) over randomly placed
// square patches; patches whose |mean| < 1e-8 are redrawn.
double sharpness(const ScalarGrid& img, int patch_size = 5, int n_patches = 4000,
                 std::uint64_t seed = 1234);

// Directory layout: atlas.gsf, velocities/NNN.gsf, energy.csv with header
// iteration,data_term,reg_term,total.
void save_atlas_model(const AtlasModel& model, const std::string& dir);
AtlasModel load_atlas_model(const std::string& dir);

}  // namespace geoshape
