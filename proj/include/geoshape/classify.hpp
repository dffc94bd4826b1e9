#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "geoshape/atlas.hpp"
#include "geoshape/dataset.hpp"
#include "geoshape/metrics.hpp"

namespace geoshape {

enum class FusionMode { Fused, ImageOnly, ShapeOnly };

FusionMode fusion_mode_from_name(const std::string& name);
const char* fusion_mode_name(FusionMode m);

struct FeatureConfig {
  int image_blocks = 16;           // image branch: blocks x blocks mean pool
  int feature_steps = 10;          // registration steps per atlas
  double feature_step_size = 1e-5;
};

// Turns an image into a feature vector:
//  - shape branch: the image is registered against each class atlas and the
//    initial velocity of the best (lowest-energy) match is flattened as
//    [x.re, x.im, y.re, y.im] in band order;
//  - image branch: block means, z-scored with statistics fit on the
//    training split.
struct FeatureExtractor {
  FusionMode mode = FusionMode::Fused;
  FeatureConfig fcfg;
  GeodesicConfig geo;
  std::vector<ScalarGrid> atlases;  // one per class, ascending class id
  std::vector<double> block_mean, block_std;
  int grid_w = 0, grid_h = 0;

  int shape_dim() const;
  int image_dim() const;
  int dim() const;

  // Fit the z-score statistics from the raw block means of these images.
  void fit_image_stats(const std::vector<const ScalarGrid*>& train_images);

  std::vector<double> raw_block_means(const ScalarGrid& img) const;
  SpectralVelocity best_velocity(const ScalarGrid& img) const;
  std::vector<double> extract(const ScalarGrid& img) const;

  // Adjoint of the image branch: scatter a seed over the image-feature
  // entries back to pixel space (the branch is linear).
  ScalarGrid image_branch_adjoint(const std::vector<double>& feature_seed) const;
};

struct Mlp {
  int in = 0, hidden = 0, out = 0;
  std::vector<double> w1, b1, w2, b2;  // w1: hidden x in, w2: out x hidden

  static Mlp init(int in, int hidden, int out, std::uint64_t seed);
  std::vector<double> logits(const std::vector<double>& x) const;
  std::vector<double> probabilities(const std::vector<double>& x) const;

  std::size_t param_count() const;
};

struct TrainConfig {
  int epochs = 150;
  int batch_size = 16;
  double learning_rate = 1e-3;  // cosine-decayed to 0 over all steps
  double weight_decay = 1e-4;
  double lambda = 1.0;  // classification-loss weight
  // Per-sample probability of zeroing the feature slice [dropout_begin,
  // dropout_end) during training, with inverted 1/(1-p) scaling when kept;
  // evaluation always sees the full vector.  Used to stop the classifier
  // leaning on one branch of a fused feature vector.
  double input_dropout = 0.0;
  int dropout_begin = 0, dropout_end = 0;
  // Sign-gradient adversarial training: when non-empty (size must equal the
  // input dimension), every sample also contributes a copy shifted by
  // radius * sign(d loss / d input) per dimension, and the clean and shifted
  // losses are averaged.  Radius-zero dimensions are never perturbed.
  std::vector<double> adv_radii;
  std::uint64_t seed = 0;
};

struct TrainReport {
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
  std::vector<double> epoch_val_accuracy;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on
//   lambda * mean cross-entropy + weight_decay * ||params||^2,
// mini-batches reshuffled each epoch, parameters restored from the
// best-validation-accuracy epoch at the end.
TrainReport train_classifier(Mlp& mlp, const std::vector<std::vector<double>>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<std::vector<double>>& val_x,
                             const std::vector<int>& val_y, const TrainConfig& cfg);

struct JointConfig {
  AtlasConfig atlas;
  FeatureConfig features;
  TrainConfig train;
  int hidden = 64;
  int rounds = 1;
  FusionMode mode = FusionMode::Fused;
  int refine_epochs = -1;      // epochs for rounds after the first; -1 means same
  double image_dropout = 0.0;  // fused mode: dropout on the image-feature slice
  // Pixel budget for adversarial training of the image branch: block-mean
  // features move by at most epsilon in pixel units under a sign attack, so
  // the classifier is trained against per-feature shifts of
  // adv_epsilon / block_std.  Zero disables; shape features are never
  // perturbed (registration is not attacked through this path).
  double adv_epsilon = 0.0;
};

struct JointModel {
  FusionMode mode = FusionMode::Fused;
  std::vector<AtlasModel> atlases;  // per class; empty in image-only mode
  FeatureExtractor extractor;
  Mlp mlp;
  std::vector<double> round_val_accuracy;
};

// Alternating schedule: (re)build one atlas per class from the training
// split (warm-started after round one), refresh features, continue training
// the classifier; repeated `rounds` times.
JointModel joint_train(const LabeledDataset& ds, const SplitIndices& split,
                       const JointConfig& cfg, std::uint64_t seed);

std::vector<std::vector<double>> extract_features(const FeatureExtractor& ex,
                                                  const std::vector<ScalarGrid>& images,
                                                  const std::vector<std::size_t>& indices);

MetricsReport evaluate_model(const JointModel& model, const std::vector<ScalarGrid>& images,
                             const std::vector<int>& labels,
                             const std::vector<std::size_t>& indices);

struct SaliencyResult {
  int predicted = -1;
  ScalarGrid map;                  // |d logit_pred / d pixel|, max-normalized
  double shape_attribution = 0.0;  // l2 norm of the shape-feature gradient
  double image_attribution = 0.0;  // l2 norm of the pixel-space gradient
};

SaliencyResult saliency(const JointModel& model, const ScalarGrid& img);

// Accuracy under gradient-sign perturbations of the input image routed
// through the image branch, clamped to valid [0,1] intensities; epsilon 0
// reports clean accuracy.  Perturbed images are re-registered, so the shape
// branch sees the attack too.
std::vector<std::pair<double, double>> robustness_sweep(const JointModel& model,
                                                        const std::vector<ScalarGrid>& images,
                                                        const std::vector<int>& labels,
                                                        const std::vector<std::size_t>& indices,
                                                        const std::vector<double>& epsilons);

// Directory layout: model.json (modes, dimensions, statistics and classifier
// weights, exact double round trip) plus atlas_NNN/ per class outside
// image-only mode.
void save_joint_model(const JointModel& model, const std::string& dir);
JointModel load_joint_model(const std::string& dir);

}  // namespace geoshape
