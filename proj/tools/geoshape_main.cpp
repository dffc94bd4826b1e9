// Command-line driver: synthetic data generation, atlas building, joint
// training, evaluation, saliency maps and robustness sweeps, all sharing one
// JSON run configuration.
#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "geoshape/atlas.hpp"
#include "geoshape/classify.hpp"
#include "geoshape/config.hpp"
#include "geoshape/dataset.hpp"
#include "geoshape/image_io.hpp"
#include "geoshape/synth.hpp"

namespace fs = std::filesystem;
using namespace geoshape;

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "override the configured seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--threads", opts.threads, "override the configured thread count");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg =
      opts.config_path.empty() ? default_run_config() : load_run_config(opts.config_path);
  if (opts.seed_set) {
    cfg.seed = opts.seed;
    cfg.synth.seed = opts.seed;
  }
  if (opts.threads >= 0) cfg.threads = opts.threads;
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  return cfg;
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "config.json").string(), run_config_to_json(cfg));
}

JointConfig joint_config_of(const RunConfig& cfg, FusionMode mode) {
  JointConfig j;
  j.atlas = cfg.atlas;
  j.features = cfg.features;
  j.train = cfg.train;
  j.train.seed = cfg.seed;
  j.hidden = cfg.hidden;
  j.rounds = cfg.rounds;
  j.refine_epochs = cfg.refine_epochs;
  j.image_dropout = cfg.image_dropout;
  j.mode = mode;
  return j;
}

std::vector<std::size_t> pick_indices(const std::string& which, const std::string& split_path,
                                      std::size_t n) {
  if (which == "all") {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  SplitIndices split = load_split(split_path);
  if (which == "train") return split.train;
  if (which == "val") return split.val;
  if (which == "test") return split.test;
  throw ConfigError("unknown split \"" + which + "\" (train, val, test or all)");
}

int run_gen_data(const CommonOpts& opts, const std::string& out_dir) {
  RunConfig cfg = resolve_config(opts);
  SynthResult result = generate_dataset(cfg.synth);

  LabeledDataset ds;
  ds.images = std::move(result.images);
  ds.labels = std::move(result.labels);
  ds.n_classes = static_cast<int>(cfg.synth.classes.size());

  std::map<std::string, std::string> extra;
  extra["seed"] = std::to_string(cfg.synth.seed);
  extra["redraws"] = std::to_string(result.redraws);
  for (std::size_t k = 0; k < cfg.synth.classes.size(); ++k)
    extra["class_" + std::to_string(k)] = shape_name(cfg.synth.classes[k].kind);
  save_dataset(ds, out_dir, extra);
  echo_config(cfg, out_dir);
  std::cout << "wrote " << ds.images.size() << " images (" << ds.n_classes << " classes, "
            << result.redraws << " redraws) to " << out_dir << "\n";
  return 0;
}

int run_build_atlas(const CommonOpts& opts, const std::string& data_dir,
                    const std::string& out_dir, int only_class) {
  RunConfig cfg = resolve_config(opts);
  LabeledDataset ds = load_dataset(data_dir);
  echo_config(cfg, out_dir);
  for (int k = 0; k < ds.n_classes; ++k) {
    if (only_class >= 0 && k != only_class) continue;
    std::vector<ScalarGrid> members;
    for (std::size_t i = 0; i < ds.images.size(); ++i)
      if (ds.labels[i] == k) members.push_back(ds.images[i]);
    if (members.empty()) throw ConfigError("class " + std::to_string(k) + " has no images");
    AtlasModel model = build_atlas(members, cfg.atlas);
    std::ostringstream name;
    name << "atlas_" << std::setw(3) << std::setfill('0') << k;
    save_atlas_model(model, (fs::path(out_dir) / name.str()).string());
    const EnergyRow& last = model.energy_history.back();
    std::cout << "class " << k << ": " << members.size() << " images, final energy "
              << last.total << " (data " << last.data << ", reg " << last.reg << ")\n";
  }
  return 0;
}

int run_train(const CommonOpts& opts, const std::string& data_dir, const std::string& out_dir,
              const std::string& mode_name, int rounds_override) {
  RunConfig cfg = resolve_config(opts);
  if (rounds_override > 0) cfg.rounds = rounds_override;
  FusionMode mode = fusion_mode_from_name(mode_name);

  LabeledDataset ds = load_dataset(data_dir);
  SplitIndices split = stratified_split(ds.labels, cfg.split_train, cfg.split_val, cfg.seed);

  JointModel model = joint_train(ds, split, joint_config_of(cfg, mode), cfg.seed);

  echo_config(cfg, out_dir);
  save_joint_model(model, out_dir);
  save_split(split, (fs::path(out_dir) / "split.json").string());

  std::string rounds_csv = "round,val_accuracy\n";
  for (std::size_t r = 0; r < model.round_val_accuracy.size(); ++r) {
    std::ostringstream row;
    row << r << "," << std::setprecision(17) << model.round_val_accuracy[r] << "\n";
    rounds_csv += row.str();
  }
  write_text_file((fs::path(out_dir) / "rounds.csv").string(), rounds_csv);

  std::cout << "trained " << fusion_mode_name(mode) << " model ("
            << model.round_val_accuracy.size() << " rounds, best val accuracy "
            << model.round_val_accuracy.back() << ") in " << out_dir << "\n";
  return 0;
}

int run_eval(const CommonOpts& opts, const std::string& model_dir, const std::string& data_dir,
             const std::string& out_dir, const std::string& which, std::string split_path) {
  resolve_config(opts);
  JointModel model = load_joint_model(model_dir);
  LabeledDataset ds = load_dataset(data_dir);
  if (split_path.empty()) split_path = (fs::path(model_dir) / "split.json").string();
  std::vector<std::size_t> indices = pick_indices(which, split_path, ds.images.size());
  if (indices.empty()) throw ConfigError("split \"" + which + "\" selects no images");

  MetricsReport report = evaluate_model(model, ds.images, ds.labels, indices);
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "metrics.json").string(), metrics_to_json(report));
  write_text_file((fs::path(out_dir) / "roc.csv").string(), roc_to_csv(report.roc));
  std::cout << "evaluated " << indices.size() << " images (" << which << "): accuracy "
            << report.accuracy;
  if (report.auc) std::cout << ", auc " << *report.auc;
  std::cout << "\n";
  return 0;
}

int run_saliency(const CommonOpts& opts, const std::string& model_dir,
                 const std::string& data_dir, std::size_t index, const std::string& out_dir) {
  resolve_config(opts);
  JointModel model = load_joint_model(model_dir);
  LabeledDataset ds = load_dataset(data_dir);
  if (index >= ds.images.size())
    throw ConfigError("image index " + std::to_string(index) + " out of range (dataset has " +
                      std::to_string(ds.images.size()) + " images)");

  SaliencyResult result = saliency(model, ds.images[index]);
  fs::create_directories(out_dir);
  write_pgm(result.map, (fs::path(out_dir) / "saliency.pgm").string());
  write_scalar_gsf(result.map, (fs::path(out_dir) / "saliency.gsf").string());

  std::ostringstream meta;
  meta << "{\n  \"index\": " << index << ",\n  \"predicted\": " << result.predicted
       << ",\n  \"label\": " << ds.labels[index] << ",\n  \"shape_attribution\": "
       << std::setprecision(17) << result.shape_attribution
       << ",\n  \"image_attribution\": " << result.image_attribution << "\n}\n";
  write_text_file((fs::path(out_dir) / "saliency.json").string(), meta.str());
  std::cout << "image " << index << ": predicted " << result.predicted << " (label "
            << ds.labels[index] << "), attribution shape " << result.shape_attribution
            << " / image " << result.image_attribution << "\n";
  return 0;
}

int run_robustness(const CommonOpts& opts, const std::string& model_dir,
                   const std::string& data_dir, const std::string& out_dir,
                   const std::string& which, std::string split_path,
                   std::vector<double> epsilons) {
  resolve_config(opts);
  JointModel model = load_joint_model(model_dir);
  LabeledDataset ds = load_dataset(data_dir);
  if (split_path.empty()) split_path = (fs::path(model_dir) / "split.json").string();
  std::vector<std::size_t> indices = pick_indices(which, split_path, ds.images.size());
  if (indices.empty()) throw ConfigError("split \"" + which + "\" selects no images");
  if (epsilons.empty()) epsilons = {0.0, 0.01, 0.02, 0.05, 0.1};

  auto sweep = robustness_sweep(model, ds.images, ds.labels, indices, epsilons);
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "robustness.csv").string(), robustness_to_csv(sweep));
  for (const auto& [eps, acc] : sweep)
    std::cout << "epsilon " << eps << ": accuracy " << acc << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deformation-based shape representation toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string data_dir, out_dir, model_dir, mode_name = "fused";
  std::string which_split = "test", split_path;
  std::size_t image_index = 0;
  int only_class = -1, rounds_override = 0;
  std::vector<double> epsilons;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic shape dataset");
  add_common(gen, opts);
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  CLI::App* atlas = app.add_subcommand("build-atlas", "estimate one atlas per class");
  add_common(atlas, opts);
  atlas->add_option("--data", data_dir, "dataset directory")->required();
  atlas->add_option("--out", out_dir, "output directory")->required();
  atlas->add_option("--class", only_class, "build only this class id");

  CLI::App* train = app.add_subcommand("train", "joint atlas + classifier training");
  add_common(train, opts);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output model directory")->required();
  train->add_option("--mode", mode_name, "fused, image-only or shape-only");
  train->add_option("--rounds", rounds_override, "override the configured round count");

  CLI::App* eval = app.add_subcommand("eval", "score a trained model on a dataset split");
  add_common(eval, opts);
  eval->add_option("--model", model_dir, "model directory")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", out_dir, "output directory")->required();
  eval->add_option("--split", which_split, "train, val, test or all");
  eval->add_option("--split-file", split_path, "split description (default: model's)");

  CLI::App* sal = app.add_subcommand("saliency", "pixel attribution map for one image");
  add_common(sal, opts);
  sal->add_option("--model", model_dir, "model directory")->required();
  sal->add_option("--data", data_dir, "dataset directory")->required();
  sal->add_option("--index", image_index, "image index")->required();
  sal->add_option("--out", out_dir, "output directory")->required();

  CLI::App* rob = app.add_subcommand("robustness", "accuracy under input perturbations");
  add_common(rob, opts);
  rob->add_option("--model", model_dir, "model directory")->required();
  rob->add_option("--data", data_dir, "dataset directory")->required();
  rob->add_option("--out", out_dir, "output directory")->required();
  rob->add_option("--split", which_split, "train, val, test or all");
  rob->add_option("--split-file", split_path, "split description (default: model's)");
  rob->add_option("--epsilons", epsilons, "perturbation strengths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(opts, out_dir);
    if (atlas->parsed()) return run_build_atlas(opts, data_dir, out_dir, only_class);
    if (train->parsed()) return run_train(opts, data_dir, out_dir, mode_name, rounds_override);
    if (eval->parsed()) return run_eval(opts, model_dir, data_dir, out_dir, which_split, split_path);
    if (sal->parsed()) return run_saliency(opts, model_dir, data_dir, image_index, out_dir);
    if (rob->parsed())
      return run_robustness(opts, model_dir, data_dir, out_dir, which_split, split_path, epsilons);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
