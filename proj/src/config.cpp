#include "geoshape/config.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

#include "geoshape/image_io.hpp"

namespace geoshape {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError("config: unknown key \"" + path + key + "\"");
}

template <typename T>
T fetch(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for \"" + path + key + "\"");
  }
}

}  // namespace

void RunConfig::finalize() {
  atlas.geodesic = geodesic;
  if (split_train < 0.0 || split_val < 0.0 || split_test < 0.0 ||
      std::abs(split_train + split_val + split_test - 1.0) > 1e-9)
    throw ConfigError("config: split fractions must be non-negative and sum to 1");
  if (threads < 0) throw ConfigError("config: threads must be >= 0");
  if (hidden < 1) throw ConfigError("config: hidden must be >= 1");
  if (rounds < 1) throw ConfigError("config: rounds must be >= 1");
  if (image_dropout < 0.0 || image_dropout >= 1.0)
    throw ConfigError("config: image_dropout must be in [0, 1)");
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.synth = default_synth_config(20, 0);
  cfg.finalize();
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + origin + ": " + e.what());
  }
  RunConfig cfg = default_run_config();

  check_keys(root, "", {"seed", "threads", "geodesic", "atlas", "features", "train", "split",
                        "synth"});
  cfg.seed = fetch<std::uint64_t>(root, "", "seed", cfg.seed);
  cfg.threads = fetch<int>(root, "", "threads", cfg.threads);

  if (root.contains("geodesic")) {
    const json& g = root["geodesic"];
    check_keys(g, "geodesic.", {"truncation", "alpha", "power", "time_steps", "sigma"});
    int trunc = fetch<int>(g, "geodesic.", "truncation", cfg.geodesic.trunc_w);
    cfg.geodesic.trunc_w = cfg.geodesic.trunc_h = trunc;
    cfg.geodesic.alpha = fetch<double>(g, "geodesic.", "alpha", cfg.geodesic.alpha);
    cfg.geodesic.power = fetch<int>(g, "geodesic.", "power", cfg.geodesic.power);
    cfg.geodesic.time_steps = fetch<int>(g, "geodesic.", "time_steps", cfg.geodesic.time_steps);
    cfg.geodesic.sigma = fetch<double>(g, "geodesic.", "sigma", cfg.geodesic.sigma);
  }
  if (root.contains("atlas")) {
    const json& a = root["atlas"];
    check_keys(a, "atlas.", {"outer_iters", "velocity_steps", "atlas_steps", "velocity_step_size",
                             "atlas_step_size", "early_stop_rel", "early_stop_patience",
                             "max_halvings"});
    cfg.atlas.outer_iters = fetch<int>(a, "atlas.", "outer_iters", cfg.atlas.outer_iters);
    cfg.atlas.velocity_steps = fetch<int>(a, "atlas.", "velocity_steps", cfg.atlas.velocity_steps);
    cfg.atlas.atlas_steps = fetch<int>(a, "atlas.", "atlas_steps", cfg.atlas.atlas_steps);
    cfg.atlas.velocity_step_size =
        fetch<double>(a, "atlas.", "velocity_step_size", cfg.atlas.velocity_step_size);
    cfg.atlas.atlas_step_size =
        fetch<double>(a, "atlas.", "atlas_step_size", cfg.atlas.atlas_step_size);
    cfg.atlas.early_stop_rel = fetch<double>(a, "atlas.", "early_stop_rel", cfg.atlas.early_stop_rel);
    cfg.atlas.early_stop_patience =
        fetch<int>(a, "atlas.", "early_stop_patience", cfg.atlas.early_stop_patience);
    cfg.atlas.max_halvings = fetch<int>(a, "atlas.", "max_halvings", cfg.atlas.max_halvings);
  }
  if (root.contains("features")) {
    const json& f = root["features"];
    check_keys(f, "features.", {"image_blocks", "feature_steps", "feature_step_size"});
    cfg.features.image_blocks = fetch<int>(f, "features.", "image_blocks", cfg.features.image_blocks);
    cfg.features.feature_steps =
        fetch<int>(f, "features.", "feature_steps", cfg.features.feature_steps);
    cfg.features.feature_step_size =
        fetch<double>(f, "features.", "feature_step_size", cfg.features.feature_step_size);
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t, "train.", {"epochs", "batch_size", "learning_rate", "weight_decay", "lambda",
                             "hidden", "rounds", "refine_epochs", "image_dropout"});
    cfg.train.epochs = fetch<int>(t, "train.", "epochs", cfg.train.epochs);
    cfg.train.batch_size = fetch<int>(t, "train.", "batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = fetch<double>(t, "train.", "learning_rate", cfg.train.learning_rate);
    cfg.train.weight_decay = fetch<double>(t, "train.", "weight_decay", cfg.train.weight_decay);
    cfg.train.lambda = fetch<double>(t, "train.", "lambda", cfg.train.lambda);
    cfg.hidden = fetch<int>(t, "train.", "hidden", cfg.hidden);
    cfg.rounds = fetch<int>(t, "train.", "rounds", cfg.rounds);
    cfg.refine_epochs = fetch<int>(t, "train.", "refine_epochs", cfg.refine_epochs);
    cfg.image_dropout = fetch<double>(t, "train.", "image_dropout", cfg.image_dropout);
  }
  if (root.contains("split")) {
    const json& s = root["split"];
    check_keys(s, "split.", {"train", "val", "test"});
    cfg.split_train = fetch<double>(s, "split.", "train", cfg.split_train);
    cfg.split_val = fetch<double>(s, "split.", "val", cfg.split_val);
    cfg.split_test = fetch<double>(s, "split.", "test", cfg.split_test);
  }
  if (root.contains("synth")) {
    const json& s = root["synth"];
    check_keys(s, "synth.",
               {"per_class", "canvas", "radius", "softness", "noise_std", "max_rotation_deg",
                "max_translation", "max_log_scale", "warp_amplitude", "warp_cutoff"});
    cfg.synth.per_class = fetch<int>(s, "synth.", "per_class", cfg.synth.per_class);
    int canvas = fetch<int>(s, "synth.", "canvas", cfg.synth.classes[0].canvas);
    double radius = fetch<double>(s, "synth.", "radius", -1.0);
    double softness = fetch<double>(s, "synth.", "softness", cfg.synth.classes[0].softness);
    for (ShapeSpec& spec : cfg.synth.classes) {
      spec.canvas = canvas;
      spec.softness = softness;
      if (radius > 0.0)
        spec.radius = (spec.kind == ShapeKind::Square) ? radius * 13.0 / 16.0 : radius;
    }
    PerturbationSpec& p = cfg.synth.pert;
    p.noise_std = fetch<double>(s, "synth.", "noise_std", p.noise_std);
    p.max_rotation_deg = fetch<double>(s, "synth.", "max_rotation_deg", p.max_rotation_deg);
    p.max_translation = fetch<double>(s, "synth.", "max_translation", p.max_translation);
    p.max_log_scale = fetch<double>(s, "synth.", "max_log_scale", p.max_log_scale);
    p.warp_amplitude = fetch<double>(s, "synth.", "warp_amplitude", p.warp_amplitude);
    p.warp_cutoff = fetch<int>(s, "synth.", "warp_cutoff", p.warp_cutoff);
  }
  cfg.synth.seed = cfg.seed;
  cfg.finalize();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path), path);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  root["threads"] = cfg.threads;
  root["geodesic"] = {{"truncation", cfg.geodesic.trunc_w},
                      {"alpha", cfg.geodesic.alpha},
                      {"power", cfg.geodesic.power},
                      {"time_steps", cfg.geodesic.time_steps},
                      {"sigma", cfg.geodesic.sigma}};
  root["atlas"] = {{"outer_iters", cfg.atlas.outer_iters},
                   {"velocity_steps", cfg.atlas.velocity_steps},
                   {"atlas_steps", cfg.atlas.atlas_steps},
                   {"velocity_step_size", cfg.atlas.velocity_step_size},
                   {"atlas_step_size", cfg.atlas.atlas_step_size},
                   {"early_stop_rel", cfg.atlas.early_stop_rel},
                   {"early_stop_patience", cfg.atlas.early_stop_patience},
                   {"max_halvings", cfg.atlas.max_halvings}};
  root["features"] = {{"image_blocks", cfg.features.image_blocks},
                      {"feature_steps", cfg.features.feature_steps},
                      {"feature_step_size", cfg.features.feature_step_size}};
  root["train"] = {{"epochs", cfg.train.epochs},
                   {"batch_size", cfg.train.batch_size},
                   {"learning_rate", cfg.train.learning_rate},
                   {"weight_decay", cfg.train.weight_decay},
                   {"lambda", cfg.train.lambda},
                   {"hidden", cfg.hidden},
                   {"rounds", cfg.rounds},
                   {"refine_epochs", cfg.refine_epochs},
                   {"image_dropout", cfg.image_dropout}};
  root["split"] = {{"train", cfg.split_train}, {"val", cfg.split_val}, {"test", cfg.split_test}};
  root["synth"] = {{"per_class", cfg.synth.per_class},
                   {"canvas", cfg.synth.classes.empty() ? 64 : cfg.synth.classes[0].canvas},
                   {"radius", cfg.synth.classes.empty() ? 16.0 : cfg.synth.classes[0].radius},
                   {"softness", cfg.synth.classes.empty() ? 1.0 : cfg.synth.classes[0].softness},
                   {"noise_std", cfg.synth.pert.noise_std},
                   {"max_rotation_deg", cfg.synth.pert.max_rotation_deg},
                   {"max_translation", cfg.synth.pert.max_translation},
                   {"max_log_scale", cfg.synth.pert.max_log_scale},
                   {"warp_amplitude", cfg.synth.pert.warp_amplitude},
                   {"warp_cutoff", cfg.synth.pert.warp_cutoff}};
  return root.dump(2) + "\n";
}

}  // namespace geoshape
