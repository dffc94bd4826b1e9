#pragma once
#include <cstdint>
#include <string>

#include "geoshape/classify.hpp"
#include "geoshape/synth.hpp"

namespace geoshape {

// One config object for the whole pipeline.  JSON parsing is strict: every
// unknown key is a ConfigError, so typos cannot silently fall back to
// defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 keeps the runtime default

  GeodesicConfig geodesic;
  AtlasConfig atlas;  // atlas.geodesic mirrors `geodesic`
  FeatureConfig features;
  TrainConfig train;
  int hidden = 64;
  int rounds = 1;
  int refine_epochs = -1;
  double image_dropout = 0.0;

  double split_train = 0.70, split_val = 0.15, split_test = 0.15;

  SynthConfig synth;

  void finalize();  // re-derives dependent fields and validates
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace geoshape
