#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "geoshape/grid.hpp"

namespace geoshape {

enum class ShapeKind { Circle, Square, Triangle, Cross, Annulus };

const char* shape_name(ShapeKind k);
ShapeKind shape_from_name(const std::string& name);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Circle;
  int canvas = 64;
  double radius = 16.0;   // base size in pixels
  double softness = 1.0;  // Gaussian edge width in pixels

  void validate() const;  // shape must fit with >= 4 px margin
};

// Signed distance to the shape boundary, negative inside, for a point given
// relative to the shape center.
double shape_sdf(ShapeKind kind, double radius, double px, double py);

// Intensity profile: 0.5 * erfc(sdf / (sqrt(2) * softness)).
ScalarGrid canonical_render(const ShapeSpec& spec);

struct PerturbationSpec {
  double max_rotation_deg = 10.0;
  double max_translation = 3.0;   // pixels, per axis
  double max_log_scale = 0.1;     // scale drawn as exp(U(-s, s))
  double warp_amplitude = 1.5;    // max |displacement| in pixels
  int warp_cutoff = 3;            // highest spatial frequency of the warp
  double noise_std = 0.02;

  // The sampled deformation must stay invertible; this bounds the warp
  // slope a priori (amplitude * 2*pi*cutoff / canvas < 0.9) and every drawn
  // sample is additionally checked numerically.
  void validate(int canvas) const;
};

// A concrete draw from a PerturbationSpec: the affine part plus a smooth
// displacement field in the shape frame (empty warp means none).
struct PerturbationParams {
  double rotation_rad = 0.0;
  double tx = 0.0, ty = 0.0;
  double log_scale = 0.0;
  VectorGrid warp;
};

// Noise-free render of the shape under an explicit perturbation; throws if
// the resulting deformation folds.  Useful for controlled experiments, e.g.
// antithetic pairs (p, -p) whose perturbations cancel in the sample mean.
ScalarGrid render_perturbed(const ShapeSpec& shape, const PerturbationParams& params);

struct SampleResult {
  ScalarGrid image;
  int redraws = 0;  // times the deformation was rejected and redrawn
};

// Deterministic in (seed, index): every random draw comes from a stream
// derived from the pair, so samples can be regenerated independently.
SampleResult generate_sample(const ShapeSpec& shape, const PerturbationSpec& pert,
                             std::uint64_t seed, std::uint64_t index);

struct SynthConfig {
  std::vector<ShapeSpec> classes;
  PerturbationSpec pert;
  int per_class = 20;
  std::uint64_t seed = 0;
};

SynthConfig default_synth_config(int per_class, std::uint64_t seed);

struct SynthResult {
  std::vector<ScalarGrid> images;  // class-major order
  std::vector<int> labels;
  long redraws = 0;
};

SynthResult generate_dataset(const SynthConfig& cfg);

}  // namespace geoshape
