#include "geoshape/classify.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "geoshape/image_io.hpp"
#include "geoshape/parallel.hpp"
#include "geoshape/rng.hpp"

namespace geoshape {

FusionMode fusion_mode_from_name(const std::string& name) {
  if (name == "fused") return FusionMode::Fused;
  if (name == "image-only") return FusionMode::ImageOnly;
  if (name == "shape-only") return FusionMode::ShapeOnly;
  throw ConfigError("unknown fusion mode \"" + name + "\"");
}

const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::Fused: return "fused";
    case FusionMode::ImageOnly: return "image-only";
    case FusionMode::ShapeOnly: return "shape-only";
  }
  throw ContractViolation("unknown fusion mode");
}

int FeatureExtractor::shape_dim() const {
  if (mode == FusionMode::ImageOnly) return 0;
  return 2 * 2 * geo.trunc_w * geo.trunc_h;
}

int FeatureExtractor::image_dim() const {
  if (mode == FusionMode::ShapeOnly) return 0;
  return fcfg.image_blocks * fcfg.image_blocks;
}

int FeatureExtractor::dim() const { return shape_dim() + image_dim(); }

std::vector<double> FeatureExtractor::raw_block_means(const ScalarGrid& img) const {
  const int blocks = fcfg.image_blocks;
  if (img.width % blocks != 0 || img.height % blocks != 0)
    throw ContractViolation("feature extractor: image extent not divisible by block count");
  const int bw = img.width / blocks, bh = img.height / blocks;
  std::vector<double> out(static_cast<std::size_t>(blocks) * blocks, 0.0);
  for (int by = 0; by < blocks; ++by)
    for (int bx = 0; bx < blocks; ++bx) {
      double s = 0.0;
      for (int y = by * bh; y < (by + 1) * bh; ++y)
        for (int x = bx * bw; x < (bx + 1) * bw; ++x) s += img.at(x, y);
      out[static_cast<std::size_t>(by) * blocks + bx] = s / (static_cast<double>(bw) * bh);
    }
  return out;
}

void FeatureExtractor::fit_image_stats(const std::vector<const ScalarGrid*>& train_images) {
  if (mode == FusionMode::ShapeOnly) return;
  if (train_images.empty()) throw ContractViolation("feature extractor: no images for stats");
  const std::size_t d = static_cast<std::size_t>(fcfg.image_blocks) * fcfg.image_blocks;
  std::vector<double> sum(d, 0.0), sum2(d, 0.0);
  for (const ScalarGrid* im : train_images) {
    std::vector<double> b = raw_block_means(*im);
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += b[i];
      sum2[i] += b[i] * b[i];
    }
  }
  const double n = static_cast<double>(train_images.size());
  block_mean.assign(d, 0.0);
  block_std.assign(d, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    block_mean[i] = sum[i] / n;
    double var = n > 1.0 ? (sum2[i] - sum[i] * sum[i] / n) / (n - 1.0) : 0.0;
    block_std[i] = std::max(std::sqrt(std::max(var, 0.0)), 1e-8);
  }
}

SpectralVelocity FeatureExtractor::best_velocity(const ScalarGrid& img) const {
  if (atlases.empty()) throw ContractViolation("feature extractor: no atlases for shape branch");
  SpectralVelocity best(geo.trunc_w, geo.trunc_h);
  double best_energy = std::numeric_limits<double>::infinity();
  for (const ScalarGrid& atlas : atlases) {
    SpectralVelocity zero(geo.trunc_w, geo.trunc_h);
    RegistrationResult r = register_image(atlas, img, zero, fcfg.feature_steps,
                                          fcfg.feature_step_size, geo);
    if (r.final_energy.total < best_energy) {
      best_energy = r.final_energy.total;
      best = std::move(r.velocity);
    }
  }
  return best;
}

std::vector<double> FeatureExtractor::extract(const ScalarGrid& img) const {
  std::vector<double> f;
  f.reserve(dim());
  if (mode != FusionMode::ImageOnly) {
    SpectralVelocity v = best_velocity(img);
    for (const SpectralScalar* s : {&v.x, &v.y}) {
      for (const std::complex<double>& z : s->c) f.push_back(z.real());
      for (const std::complex<double>& z : s->c) f.push_back(z.imag());
    }
  }
  if (mode != FusionMode::ShapeOnly) {
    if (block_mean.empty()) throw ContractViolation("feature extractor: image stats not fit");
    std::vector<double> b = raw_block_means(img);
    for (std::size_t i = 0; i < b.size(); ++i)
      f.push_back((b[i] - block_mean[i]) / block_std[i]);
  }
  return f;
}

ScalarGrid FeatureExtractor::image_branch_adjoint(const std::vector<double>& feature_seed) const {
  if (grid_w <= 0 || grid_h <= 0)
    throw ContractViolation("feature extractor: grid extent not set");
  ScalarGrid out(grid_w, grid_h, 0.0);
  if (mode == FusionMode::ShapeOnly) return out;
  if (feature_seed.size() != static_cast<std::size_t>(dim()))
    throw ContractViolation("image_branch_adjoint: seed length mismatch");
  const int blocks = fcfg.image_blocks;
  const int bw = grid_w / blocks, bh = grid_h / blocks;
  const double inv_area = 1.0 / (static_cast<double>(bw) * bh);
  const std::size_t off = static_cast<std::size_t>(shape_dim());
  for (int by = 0; by < blocks; ++by)
    for (int bx = 0; bx < blocks; ++bx) {
      std::size_t bi = static_cast<std::size_t>(by) * blocks + bx;
      double g = feature_seed[off + bi] * inv_area / block_std[bi];
      for (int y = by * bh; y < (by + 1) * bh; ++y)
        for (int x = bx * bw; x < (bx + 1) * bw; ++x) out.at(x, y) += g;
    }
  return out;
}

Mlp Mlp::init(int in, int hidden, int out, std::uint64_t seed) {
  if (in < 1 || hidden < 1 || out < 1) throw ContractViolation("mlp: dimensions must be positive");
  Mlp m;
  m.in = in;
  m.hidden = hidden;
  m.out = out;
  std::mt19937_64 eng = make_engine(seed, rng_stream::kMlpInit);
  double lim1 = std::sqrt(6.0 / (in + hidden));
  double lim2 = std::sqrt(6.0 / (hidden + out));
  std::uniform_real_distribution<double> u1(-lim1, lim1), u2(-lim2, lim2);
  m.w1.resize(static_cast<std::size_t>(hidden) * in);
  m.b1.assign(hidden, 0.0);
  m.w2.resize(static_cast<std::size_t>(out) * hidden);
  m.b2.assign(out, 0.0);
  for (double& w : m.w1) w = u1(eng);
  for (double& w : m.w2) w = u2(eng);
  return m;
}

std::size_t Mlp::param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

namespace {

void forward_hidden(const Mlp& m, const std::vector<double>& x, std::vector<double>& h,
                    std::vector<double>& logits) {
  h.assign(m.hidden, 0.0);
  for (int j = 0; j < m.hidden; ++j) {
    double acc = m.b1[j];
    const double* row = m.w1.data() + static_cast<std::size_t>(j) * m.in;
    for (int i = 0; i < m.in; ++i) acc += row[i] * x[i];
    h[j] = std::tanh(acc);
  }
  logits.assign(m.out, 0.0);
  for (int k = 0; k < m.out; ++k) {
    double acc = m.b2[k];
    const double* row = m.w2.data() + static_cast<std::size_t>(k) * m.hidden;
    for (int j = 0; j < m.hidden; ++j) acc += row[j] * h[j];
    logits[k] = acc;
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = static_cast<int>(k);
  return best;
}

// Gradient of the network output contracted with dlogits, written into dx.
void backprop_input(const Mlp& m, const std::vector<double>& h,
                    const std::vector<double>& dlogits, std::vector<double>& dx) {
  std::vector<double> dpre(m.hidden, 0.0);
  for (int j = 0; j < m.hidden; ++j) {
    double dh = 0.0;
    for (int k = 0; k < m.out; ++k) dh += m.w2[static_cast<std::size_t>(k) * m.hidden + j] * dlogits[k];
    dpre[j] = dh * (1.0 - h[j] * h[j]);
  }
  dx.assign(m.in, 0.0);
  for (int j = 0; j < m.hidden; ++j) {
    const double* row = m.w1.data() + static_cast<std::size_t>(j) * m.in;
    double d = dpre[j];
    for (int i = 0; i < m.in; ++i) dx[i] += row[i] * d;
  }
}

}  // namespace

std::vector<double> Mlp::logits(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != in) throw ContractViolation("mlp: input dimension mismatch");
  std::vector<double> h, l;
  forward_hidden(*this, x, h, l);
  return l;
}

std::vector<double> Mlp::probabilities(const std::vector<double>& x) const {
  return softmax(logits(x));
}

TrainReport train_classifier(Mlp& mlp, const std::vector<std::vector<double>>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<std::vector<double>>& val_x,
                             const std::vector<int>& val_y, const TrainConfig& cfg) {
  if (train_x.empty() || train_x.size() != train_y.size())
    throw ContractViolation("train_classifier: bad training data");
  if (val_x.size() != val_y.size()) throw ContractViolation("train_classifier: bad validation data");
  for (const auto& x : train_x)
    if (static_cast<int>(x.size()) != mlp.in)
      throw ContractViolation("train_classifier: feature dimension mismatch");
  for (int y : train_y)
    if (y < 0 || y >= mlp.out) throw ContractViolation("train_classifier: label out of range");
  if (cfg.epochs < 0 || cfg.batch_size < 1)
    throw ContractViolation("train_classifier: bad epochs/batch size");
  if (cfg.input_dropout < 0.0 || cfg.input_dropout >= 1.0)
    throw ContractViolation("train_classifier: input_dropout must be in [0, 1)");
  if (cfg.dropout_begin < 0 || cfg.dropout_end < cfg.dropout_begin || cfg.dropout_end > mlp.in)
    throw ContractViolation("train_classifier: dropout range out of bounds");
  const bool dropout_active = cfg.input_dropout > 0.0 && cfg.dropout_end > cfg.dropout_begin;
  const double kept_scale = dropout_active ? 1.0 / (1.0 - cfg.input_dropout) : 1.0;
  const bool adv_active = !cfg.adv_radii.empty();
  if (adv_active && static_cast<int>(cfg.adv_radii.size()) != mlp.in)
    throw ContractViolation("train_classifier: adv_radii dimension mismatch");

  const std::size_t n = train_x.size();
  const long n_batches = static_cast<long>((n + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = std::max(1L, cfg.epochs * n_batches);

  std::vector<double>* params[4] = {&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2};
  std::vector<double> grads[4], m1[4], m2[4];
  for (int p = 0; p < 4; ++p) {
    grads[p].assign(params[p]->size(), 0.0);
    m1[p].assign(params[p]->size(), 0.0);
    m2[p].assign(params[p]->size(), 0.0);
  }

  auto val_accuracy = [&]() {
    if (val_x.empty()) return 0.0;
    long correct = 0;
    for (std::size_t i = 0; i < val_x.size(); ++i)
      if (argmax(mlp.logits(val_x[i])) == val_y[i]) ++correct;
    return static_cast<double>(correct) / val_x.size();
  };

  TrainReport report;
  std::vector<double> best[4];
  bool have_best = false;

  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long step = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> h, logits, dlogits, dpre, dropped, dx, adv;
  std::uniform_real_distribution<double> uni01(0.0, 1.0);

  // One sample's cross-entropy gradient, weighted by coeff, added to grads.
  // Leaves h/dlogits holding this sample's forward pass.
  auto accumulate = [&](const std::vector<double>& x, int y, double coeff) {
    forward_hidden(mlp, x, h, logits);
    dlogits = softmax(logits);
    dlogits[y] -= 1.0;
    for (int k = 0; k < mlp.out; ++k) {
      double d = dlogits[k] * coeff;
      grads[3][k] += d;
      double* g2 = grads[2].data() + static_cast<std::size_t>(k) * mlp.hidden;
      for (int j = 0; j < mlp.hidden; ++j) g2[j] += d * h[j];
    }
    dpre.assign(mlp.hidden, 0.0);
    for (int j = 0; j < mlp.hidden; ++j) {
      double dh = 0.0;
      for (int k = 0; k < mlp.out; ++k)
        dh += mlp.w2[static_cast<std::size_t>(k) * mlp.hidden + j] * dlogits[k];
      dpre[j] = dh * (1.0 - h[j] * h[j]) * coeff;
    }
    for (int j = 0; j < mlp.hidden; ++j) {
      grads[1][j] += dpre[j];
      double* g1 = grads[0].data() + static_cast<std::size_t>(j) * mlp.in;
      double d = dpre[j];
      for (int i = 0; i < mlp.in; ++i) g1[i] += d * x[i];
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 eng = make_engine(cfg.seed, rng_stream::kShuffle, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), eng);
    for (long b = 0; b < n_batches; ++b) {
      std::size_t lo = static_cast<std::size_t>(b) * cfg.batch_size;
      std::size_t hi = std::min(n, lo + cfg.batch_size);
      for (int p = 0; p < 4; ++p) std::fill(grads[p].begin(), grads[p].end(), 0.0);
      const double scale = cfg.lambda / static_cast<double>(hi - lo);
      if (cfg.lambda != 0.0) {
        for (std::size_t s = lo; s < hi; ++s) {
          const std::vector<double>* xp = &train_x[order[s]];
          if (dropout_active) {
            dropped = *xp;
            double f = uni01(eng) < cfg.input_dropout ? 0.0 : kept_scale;
            for (int d = cfg.dropout_begin; d < cfg.dropout_end; ++d) dropped[d] *= f;
            xp = &dropped;
          }
          const std::vector<double>& x = *xp;
          int y = train_y[order[s]];
          forward_hidden(mlp, x, h, logits);
          dlogits = softmax(logits);
          dlogits[y] -= 1.0;
          for (int k = 0; k < mlp.out; ++k) {
            double d = dlogits[k] * scale;
            grads[3][k] += d;
            double* g2 = grads[2].data() + static_cast<std::size_t>(k) * mlp.hidden;
            for (int j = 0; j < mlp.hidden; ++j) g2[j] += d * h[j];
          }
          dpre.assign(mlp.hidden, 0.0);
          for (int j = 0; j < mlp.hidden; ++j) {
            double dh = 0.0;
            for (int k = 0; k < mlp.out; ++k)
              dh += mlp.w2[static_cast<std::size_t>(k) * mlp.hidden + j] * dlogits[k];
            dpre[j] = dh * (1.0 - h[j] * h[j]) * scale;
          }
          for (int j = 0; j < mlp.hidden; ++j) {
            grads[1][j] += dpre[j];
            double* g1 = grads[0].data() + static_cast<std::size_t>(j) * mlp.in;
            double d = dpre[j];
            for (int i = 0; i < mlp.in; ++i) g1[i] += d * x[i];
          }
        }
      }
      for (int p = 0; p < 4; ++p) {
        const std::vector<double>& th = *params[p];
        for (std::size_t i = 0; i < th.size(); ++i) grads[p][i] += 2.0 * cfg.weight_decay * th[i];
      }
      double lr = cfg.learning_rate * 0.5 *
                  (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      ++step;
      double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (int p = 0; p < 4; ++p) {
        std::vector<double>& th = *params[p];
        for (std::size_t i = 0; i < th.size(); ++i) {
          m1[p][i] = beta1 * m1[p][i] + (1.0 - beta1) * grads[p][i];
          m2[p][i] = beta2 * m2[p][i] + (1.0 - beta2) * grads[p][i] * grads[p][i];
          th[i] -= lr * (m1[p][i] / bc1) / (std::sqrt(m2[p][i] / bc2) + adam_eps);
        }
      }
    }
    double acc = val_accuracy();
    report.epoch_val_accuracy.push_back(acc);
    if (!val_x.empty() && (!have_best || acc > report.best_val_accuracy)) {
      report.best_val_accuracy = acc;
      report.best_epoch = epoch;
      for (int p = 0; p < 4; ++p) best[p] = *params[p];
      have_best = true;
    }
  }
  if (have_best)
    for (int p = 0; p < 4; ++p) *params[p] = best[p];
  return report;
}

std::vector<std::vector<double>> extract_features(const FeatureExtractor& ex,
                                                  const std::vector<ScalarGrid>& images,
                                                  const std::vector<std::size_t>& indices) {
  for (std::size_t i : indices)
    if (i >= images.size()) throw ContractViolation("extract_features: index out of range");
  std::vector<std::vector<double>> out(indices.size());
  parallel_for_each(static_cast<long>(indices.size()),
                    [&](long i) { out[i] = ex.extract(images[indices[i]]); });
  return out;
}

JointModel joint_train(const LabeledDataset& ds, const SplitIndices& split,
                       const JointConfig& cfg, std::uint64_t seed) {
  ds.validate();
  if (split.train.empty()) throw ContractViolation("joint_train: empty training split");
  if (cfg.rounds < 1) throw ContractViolation("joint_train: rounds must be >= 1");
  const int n_classes = ds.n_classes;

  JointModel model;
  model.mode = cfg.mode;

  FeatureExtractor ex;
  ex.mode = cfg.mode;
  ex.fcfg = cfg.features;
  ex.geo = cfg.atlas.geodesic;
  ex.grid_w = ds.images[split.train[0]].width;
  ex.grid_h = ds.images[split.train[0]].height;

  std::vector<const ScalarGrid*> train_ptrs;
  std::vector<int> train_y, val_y;
  for (std::size_t i : split.train) {
    train_ptrs.push_back(&ds.images[i]);
    train_y.push_back(ds.labels[i]);
  }
  for (std::size_t i : split.val) val_y.push_back(ds.labels[i]);
  ex.fit_image_stats(train_ptrs);

  std::vector<std::vector<ScalarGrid>> class_images(n_classes);
  for (std::size_t i : split.train) class_images[ds.labels[i]].push_back(ds.images[i]);
  if (cfg.mode != FusionMode::ImageOnly)
    for (int c = 0; c < n_classes; ++c)
      if (class_images[c].empty())
        throw ContractViolation("joint_train: class without training images");

  model.atlases.clear();
  bool mlp_ready = false;
  for (int r = 0; r < cfg.rounds; ++r) {
    if (cfg.mode != FusionMode::ImageOnly) {
      if (model.atlases.empty()) model.atlases.resize(n_classes);
      for (int c = 0; c < n_classes; ++c) {
        const bool warm = !model.atlases[c].velocities.empty();
        model.atlases[c] = build_atlas(class_images[c], cfg.atlas,
                                       warm ? &model.atlases[c].atlas : nullptr,
                                       warm ? &model.atlases[c].velocities : nullptr);
      }
      ex.atlases.clear();
      for (int c = 0; c < n_classes; ++c) ex.atlases.push_back(model.atlases[c].atlas);
    }

    std::vector<std::vector<double>> train_x = extract_features(ex, ds.images, split.train);
    std::vector<std::vector<double>> val_x = extract_features(ex, ds.images, split.val);

    if (!mlp_ready) {
      model.mlp = Mlp::init(ex.dim(), cfg.hidden, n_classes, derive_seed(seed, rng_stream::kMlpInit));
      mlp_ready = true;
    }
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, rng_stream::kShuffle, static_cast<std::uint64_t>(r));
    if (r > 0 && cfg.refine_epochs >= 0) tc.epochs = cfg.refine_epochs;
    if (cfg.mode == FusionMode::Fused && cfg.image_dropout > 0.0) {
      tc.input_dropout = cfg.image_dropout;
      tc.dropout_begin = ex.shape_dim();
      tc.dropout_end = ex.dim();
    }
    TrainReport rep = train_classifier(model.mlp, train_x, train_y, val_x, val_y, tc);
    model.round_val_accuracy.push_back(rep.best_val_accuracy);
  }
  model.extractor = std::move(ex);
  return model;
}

MetricsReport evaluate_model(const JointModel& model, const std::vector<ScalarGrid>& images,
                             const std::vector<int>& labels,
                             const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractViolation("evaluate_model: empty index set");
  std::vector<std::vector<double>> feats = extract_features(model.extractor, images, indices);
  std::vector<std::vector<double>> scores(indices.size());
  std::vector<int> y(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    scores[i] = model.mlp.probabilities(feats[i]);
    y[i] = labels[indices[i]];
  }
  return compute_metrics(scores, y);
}

SaliencyResult saliency(const JointModel& model, const ScalarGrid& img) {
  const FeatureExtractor& ex = model.extractor;
  std::vector<double> x = ex.extract(img);
  std::vector<double> h, logits;
  forward_hidden(model.mlp, x, h, logits);
  SaliencyResult res;
  res.predicted = argmax(logits);
  std::vector<double> dlogits(logits.size(), 0.0);
  dlogits[res.predicted] = 1.0;
  std::vector<double> dx;
  backprop_input(model.mlp, h, dlogits, dx);

  double shape_norm2 = 0.0;
  for (int i = 0; i < ex.shape_dim(); ++i) shape_norm2 += dx[i] * dx[i];
  res.shape_attribution = std::sqrt(shape_norm2);

  res.map = ScalarGrid(img.width, img.height, 0.0);
  if (ex.image_dim() > 0) {
    ScalarGrid pixel_grad = ex.image_branch_adjoint(dx);
    double norm2 = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < pixel_grad.size(); ++i) {
      norm2 += pixel_grad.data[i] * pixel_grad.data[i];
      peak = std::max(peak, std::abs(pixel_grad.data[i]));
    }
    res.image_attribution = std::sqrt(norm2);
    if (peak > 0.0)
      for (std::size_t i = 0; i < pixel_grad.size(); ++i)
        res.map.data[i] = std::abs(pixel_grad.data[i]) / peak;
  }
  return res;
}

std::vector<std::pair<double, double>> robustness_sweep(const JointModel& model,
                                                        const std::vector<ScalarGrid>& images,
                                                        const std::vector<int>& labels,
                                                        const std::vector<std::size_t>& indices,
                                                        const std::vector<double>& epsilons) {
  if (indices.empty()) throw ContractViolation("robustness_sweep: empty index set");
  const FeatureExtractor& ex = model.extractor;
  std::vector<std::vector<double>> clean = extract_features(ex, images, indices);

  std::vector<std::pair<double, double>> rows;
  for (double eps : epsilons) {
    if (eps < 0.0) throw ContractViolation("robustness_sweep: negative epsilon");
    std::vector<int> correct(indices.size(), 0);
    if (eps == 0.0) {
      for (std::size_t i = 0; i < indices.size(); ++i)
        correct[i] = argmax(model.mlp.logits(clean[i])) == labels[indices[i]] ? 1 : 0;
    } else {
      parallel_for_each(static_cast<long>(indices.size()), [&](long i) {
        const ScalarGrid& img = images[indices[i]];
        int y = labels[indices[i]];
        std::vector<double> h, logits;
        forward_hidden(model.mlp, clean[i], h, logits);
        std::vector<double> dlogits = softmax(logits);
        dlogits[y] -= 1.0;
        std::vector<double> dx;
        backprop_input(model.mlp, h, dlogits, dx);
        ScalarGrid pixel_grad = ex.image_branch_adjoint(dx);
        ScalarGrid pert = img;
        for (std::size_t px = 0; px < pert.size(); ++px) {
          double g = pixel_grad.data[px];
          double s = (g > 0.0) ? 1.0 : ((g < 0.0) ? -1.0 : 0.0);
          // Perturbed inputs stay valid intensities, matching the [0,1]
          // range the generator clips to.
          pert.data[px] = std::clamp(pert.data[px] + eps * s, 0.0, 1.0);
        }
        std::vector<double> f = ex.extract(pert);
        correct[i] = argmax(model.mlp.logits(f)) == y ? 1 : 0;
      });
    }
    long c = 0;
    for (int v : correct) c += v;
    rows.emplace_back(eps, static_cast<double>(c) / indices.size());
  }
  return rows;
}

void save_joint_model(const JointModel& model, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json root;
  root["mode"] = fusion_mode_name(model.mode);
  root["grid_w"] = model.extractor.grid_w;
  root["grid_h"] = model.extractor.grid_h;
  root["features"] = {{"image_blocks", model.extractor.fcfg.image_blocks},
                      {"feature_steps", model.extractor.fcfg.feature_steps},
                      {"feature_step_size", model.extractor.fcfg.feature_step_size}};
  const GeodesicConfig& g = model.extractor.geo;
  root["geodesic"] = {{"trunc_w", g.trunc_w}, {"trunc_h", g.trunc_h},   {"alpha", g.alpha},
                      {"power", g.power},     {"time_steps", g.time_steps}, {"sigma", g.sigma}};
  root["block_mean"] = model.extractor.block_mean;
  root["block_std"] = model.extractor.block_std;
  root["round_val_accuracy"] = model.round_val_accuracy;
  root["n_atlases"] = model.atlases.size();
  root["mlp"] = {{"in", model.mlp.in},   {"hidden", model.mlp.hidden}, {"out", model.mlp.out},
                 {"w1", model.mlp.w1},   {"b1", model.mlp.b1},         {"w2", model.mlp.w2},
                 {"b2", model.mlp.b2}};
  write_text_file((fs::path(dir) / "model.json").string(), root.dump(2) + "\n");
  for (std::size_t k = 0; k < model.atlases.size(); ++k) {
    std::ostringstream name;
    name << "atlas_" << std::setw(3) << std::setfill('0') << k;
    save_atlas_model(model.atlases[k], (fs::path(dir) / name.str()).string());
  }
}

JointModel load_joint_model(const std::string& dir) {
  namespace fs = std::filesystem;
  std::string path = (fs::path(dir) / "model.json").string();
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path, static_cast<std::size_t>(e.byte), "invalid model description");
  }
  JointModel model;
  try {
    model.mode = fusion_mode_from_name(root.at("mode").get<std::string>());
    model.extractor.mode = model.mode;
    model.extractor.grid_w = root.at("grid_w").get<int>();
    model.extractor.grid_h = root.at("grid_h").get<int>();
    const auto& f = root.at("features");
    model.extractor.fcfg.image_blocks = f.at("image_blocks").get<int>();
    model.extractor.fcfg.feature_steps = f.at("feature_steps").get<int>();
    model.extractor.fcfg.feature_step_size = f.at("feature_step_size").get<double>();
    const auto& g = root.at("geodesic");
    model.extractor.geo.trunc_w = g.at("trunc_w").get<int>();
    model.extractor.geo.trunc_h = g.at("trunc_h").get<int>();
    model.extractor.geo.alpha = g.at("alpha").get<double>();
    model.extractor.geo.power = g.at("power").get<int>();
    model.extractor.geo.time_steps = g.at("time_steps").get<int>();
    model.extractor.geo.sigma = g.at("sigma").get<double>();
    model.extractor.block_mean = root.at("block_mean").get<std::vector<double>>();
    model.extractor.block_std = root.at("block_std").get<std::vector<double>>();
    model.round_val_accuracy = root.at("round_val_accuracy").get<std::vector<double>>();
    const auto& m = root.at("mlp");
    model.mlp.in = m.at("in").get<int>();
    model.mlp.hidden = m.at("hidden").get<int>();
    model.mlp.out = m.at("out").get<int>();
    model.mlp.w1 = m.at("w1").get<std::vector<double>>();
    model.mlp.b1 = m.at("b1").get<std::vector<double>>();
    model.mlp.w2 = m.at("w2").get<std::vector<double>>();
    model.mlp.b2 = m.at("b2").get<std::vector<double>>();
    std::size_t n_atlases = root.at("n_atlases").get<std::size_t>();
    for (std::size_t k = 0; k < n_atlases; ++k) {
      std::ostringstream name;
      name << "atlas_" << std::setw(3) << std::setfill('0') << k;
      model.atlases.push_back(load_atlas_model((fs::path(dir) / name.str()).string()));
      model.extractor.atlases.push_back(model.atlases.back().atlas);
    }
  } catch (const nlohmann::json::exception&) {
    throw FormatError(path, 0, "model description missing required fields");
  }
  if (model.mlp.w1.size() != static_cast<std::size_t>(model.mlp.hidden) * model.mlp.in ||
      model.mlp.w2.size() != static_cast<std::size_t>(model.mlp.out) * model.mlp.hidden)
    throw FormatError(path, 0, "classifier weight shapes are inconsistent");
  return model;
}

}  // namespace geoshape
