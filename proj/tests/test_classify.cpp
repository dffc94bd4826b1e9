#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "geoshape/classify.hpp"
#include "geoshape/errors.hpp"
#include "geoshape/image_io.hpp"
#include "geoshape/rng.hpp"
#include "geoshape/synth.hpp"

using namespace geoshape;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("geoshape_cls_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

ScalarGrid filled(int w, int h, double v) {
  ScalarGrid g(w, h);
  for (auto& p : g.data) p = v;
  return g;
}

// Two-class image set on a small canvas: bright-left versus bright-right.
LabeledDataset sided_dataset(int per_class, int canvas) {
  LabeledDataset ds;
  ds.n_classes = 2;
  auto eng = make_engine(2024, rng_stream::kTest, 5);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (int cls = 0; cls < 2; ++cls)
    for (int i = 0; i < per_class; ++i) {
      ScalarGrid g(canvas, canvas);
      for (int y = 0; y < canvas; ++y)
        for (int x = 0; x < canvas; ++x) {
          bool bright = (cls == 0) ? (x < canvas / 2) : (x >= canvas / 2);
          g.at(x, y) = std::clamp((bright ? 0.8 : 0.2) + jitter(eng), 0.0, 1.0);
        }
      ds.images.push_back(std::move(g));
      ds.labels.push_back(cls);
    }
  return ds;
}

}  // namespace

TEST_CASE("roc polyline and area on hand-checked score sets") {
  // Ranked pairs: one inversion among four positive/negative pairings.
  std::vector<std::pair<double, int>> scored{{0.9, 1}, {0.8, 0}, {0.7, 1}, {0.3, 0}};
  auto roc = roc_curve(scored);
  REQUIRE(roc.size() == 5);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc[1].fpr == 0.0);
  CHECK(roc[1].tpr == doctest::Approx(0.5));
  CHECK(roc[2].fpr == doctest::Approx(0.5));
  CHECK(roc[2].tpr == doctest::Approx(0.5));
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  CHECK(trapezoid_auc(roc) == doctest::Approx(0.75).epsilon(1e-15));

  // A tie across classes collapses to one diagonal step worth half credit.
  auto tied = roc_curve({{0.5, 1}, {0.5, 0}});
  REQUIRE(tied.size() == 2);
  CHECK(trapezoid_auc(tied) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(trapezoid_auc(roc_curve({{0.9, 1}, {0.1, 0}})) == doctest::Approx(1.0));
  CHECK(trapezoid_auc(roc_curve({{0.1, 1}, {0.9, 0}})) == doctest::Approx(0.0));
  CHECK(roc_curve({{0.4, 1}, {0.2, 1}}).empty());  // needs both outcomes
}

TEST_CASE("multiclass metrics on a hand-worked example") {
  std::vector<std::vector<double>> scores{{0.8, 0.2}, {0.4, 0.6}, {0.3, 0.7}};
  std::vector<int> labels{0, 1, 0};
  MetricsReport m = compute_metrics(scores, labels);

  CHECK(m.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  REQUIRE(m.per_class_precision.size() == 2);
  CHECK(m.per_class_precision[0] == doctest::Approx(1.0));
  CHECK(m.per_class_sensitivity[0] == doctest::Approx(0.5));
  CHECK(m.per_class_specificity[0] == doctest::Approx(1.0));
  CHECK(m.per_class_f1[0] == doctest::Approx(2.0 / 3.0));
  CHECK(m.per_class_precision[1] == doctest::Approx(0.5));
  CHECK(m.per_class_sensitivity[1] == doctest::Approx(1.0));
  CHECK(m.per_class_specificity[1] == doctest::Approx(0.5));
  CHECK(m.per_class_f1[1] == doctest::Approx(2.0 / 3.0));
  // Pooled one-vs-rest counts: TP 2, FP 1, FN 1, TN 2.
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.sensitivity == doctest::Approx(2.0 / 3.0));
  CHECK(m.specificity == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  // Pooled ranking: six concordant pairs of nine.
  REQUIRE(m.auc.has_value());
  CHECK(*m.auc == doctest::Approx(6.0 / 9.0).epsilon(1e-12));

  // Argmax breaks ties toward the lower class index.
  MetricsReport tie = compute_metrics({{0.5, 0.5}}, {1});
  CHECK(tie.accuracy == 0.0);

  MetricsReport one_class = compute_metrics({{1.0}, {0.8}}, {0, 0});
  CHECK(one_class.accuracy == 1.0);
  CHECK_FALSE(one_class.auc.has_value());

  CHECK_THROWS_AS(compute_metrics({}, {}), ContractViolation);
  CHECK_THROWS_AS(compute_metrics({{0.5}}, {0, 1}), ContractViolation);
}

TEST_CASE("report serialization is stable and well formed") {
  MetricsReport m = compute_metrics({{0.8, 0.2}, {0.4, 0.6}, {0.3, 0.7}}, {0, 1, 0});
  std::string a = metrics_to_json(m);
  std::string b = metrics_to_json(m);
  CHECK(a == b);
  auto parsed = nlohmann::json::parse(a);
  CHECK(parsed.at("accuracy").get<double>() == doctest::Approx(2.0 / 3.0));
  CHECK(parsed.at("auc").is_number());
  CHECK(parsed.at("per_class").at("f1").size() == 2);

  MetricsReport one_class = compute_metrics({{1.0}}, {0});
  auto parsed2 = nlohmann::json::parse(metrics_to_json(one_class));
  CHECK(parsed2.at("auc").is_null());

  std::string csv = roc_to_csv(m.roc);
  CHECK(csv.rfind("fpr,tpr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(m.roc.size()) + 1);
  std::string rcsv = robustness_to_csv({{0.0, 0.875}, {0.1, 0.5}});
  CHECK(rcsv.rfind("epsilon,accuracy\n", 0) == 0);
  CHECK(rcsv.find("0.875") != std::string::npos);
}

TEST_CASE("stratified split covers every index once per class") {
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) labels.push_back(i < 10 ? 0 : 1);
  SplitIndices s = stratified_split(labels, 0.7, 0.15, 99);
  CHECK(s.train.size() == 14);
  CHECK(s.val.size() == 4);
  CHECK(s.test.size() == 2);

  std::set<std::size_t> seen;
  auto absorb = [&](const std::vector<std::size_t>& v) {
    CHECK(std::is_sorted(v.begin(), v.end()));
    for (std::size_t i : v) CHECK(seen.insert(i).second);
  };
  absorb(s.train);
  absorb(s.val);
  absorb(s.test);
  CHECK(seen.size() == 20);

  auto count_class = [&](const std::vector<std::size_t>& v, int cls) {
    return std::count_if(v.begin(), v.end(), [&](std::size_t i) { return labels[i] == cls; });
  };
  CHECK(count_class(s.train, 0) == 7);
  CHECK(count_class(s.train, 1) == 7);
  CHECK(count_class(s.val, 0) == 2);
  CHECK(count_class(s.test, 1) == 1);

  SplitIndices again = stratified_split(labels, 0.7, 0.15, 99);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
  SplitIndices other = stratified_split(labels, 0.7, 0.15, 100);
  CHECK(other.train != s.train);

  CHECK_THROWS_AS(stratified_split(labels, 0.9, 0.2, 1), ContractViolation);
  CHECK_THROWS_AS(stratified_split(labels, -0.1, 0.5, 1), ContractViolation);
}

TEST_CASE("dataset directory round trip") {
  TempDir tmp;
  LabeledDataset ds;
  ds.n_classes = 2;
  ds.images = {filled(3, 2, 0.25), filled(3, 2, 0.5), filled(3, 2, 0.75)};
  ds.labels = {0, 1, 1};
  std::string dir = (tmp.path / "data").string();
  save_dataset(ds, dir, {{"note", "fixture"}});

  LabeledDataset back = load_dataset(dir);
  CHECK(back.n_classes == 2);
  REQUIRE(back.images.size() == 3);
  CHECK(back.labels == ds.labels);
  for (int i = 0; i < 3; ++i)
    CHECK(max_abs_diff(ds.images[static_cast<std::size_t>(i)],
                       back.images[static_cast<std::size_t>(i)]) == 0.0);
  auto manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
  CHECK(manifest.at("count").get<int>() == 3);
  CHECK(manifest.at("note").get<std::string>() == "fixture");

  LabeledDataset bad = ds;
  bad.labels = {0, 1};
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = ds;
  bad.labels = {0, 1, 2};
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("fusion mode names round trip") {
  for (FusionMode m : {FusionMode::Fused, FusionMode::ImageOnly, FusionMode::ShapeOnly})
    CHECK(fusion_mode_from_name(fusion_mode_name(m)) == m);
  CHECK(std::string(fusion_mode_name(FusionMode::ImageOnly)) == "image-only");
  CHECK_THROWS_AS(fusion_mode_from_name("both"), ConfigError);
}

TEST_CASE("feature extractor dimensions and block means") {
  FeatureExtractor ex;
  ex.mode = FusionMode::Fused;
  ex.fcfg.image_blocks = 2;
  ex.geo.trunc_w = 4;
  ex.geo.trunc_h = 3;
  ex.grid_w = 4;
  ex.grid_h = 4;
  ex.atlases = {filled(4, 4, 0.5)};
  CHECK(ex.shape_dim() == 4 * 4 * 3);
  CHECK(ex.image_dim() == 4);
  CHECK(ex.dim() == ex.shape_dim() + ex.image_dim());

  ScalarGrid img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(x, y) = (y < 2 ? (x < 2 ? 0.1 : 0.3) : (x < 2 ? 0.5 : 0.9));
  auto means = ex.raw_block_means(img);
  REQUIRE(means.size() == 4);
  CHECK(means[0] == doctest::Approx(0.1));
  CHECK(means[1] == doctest::Approx(0.3));
  CHECK(means[2] == doctest::Approx(0.5));
  CHECK(means[3] == doctest::Approx(0.9));

  FeatureExtractor odd = ex;
  odd.fcfg.image_blocks = 3;
  CHECK_THROWS_AS(odd.raw_block_means(img), ContractViolation);

  ex.mode = FusionMode::ImageOnly;
  CHECK(ex.shape_dim() == 0);
  CHECK(ex.dim() == 4);
  ex.mode = FusionMode::ShapeOnly;
  CHECK(ex.image_dim() == 0);
  CHECK(ex.dim() == 4 * 4 * 3);
}

TEST_CASE("image statistics standardize and floor degenerate spreads") {
  FeatureExtractor ex;
  ex.mode = FusionMode::ImageOnly;
  ex.fcfg.image_blocks = 1;
  ex.grid_w = 2;
  ex.grid_h = 2;
  ScalarGrid a = filled(2, 2, 0.2), b = filled(2, 2, 0.6);
  ex.fit_image_stats({&a, &b});
  REQUIRE(ex.block_mean.size() == 1);
  CHECK(ex.block_mean[0] == doctest::Approx(0.4));
  // Sample standard deviation over two values 0.2 and 0.6.
  CHECK(ex.block_std[0] == doctest::Approx(std::sqrt(0.08)).epsilon(1e-12));
  auto fa = ex.extract(a);
  REQUIRE(fa.size() == 1);
  CHECK(fa[0] == doctest::Approx((0.2 - 0.4) / std::sqrt(0.08)).epsilon(1e-12));

  // Identical inputs: the spread floors at 1e-8 and features sit at zero.
  ex.fit_image_stats({&a, &a});
  CHECK(ex.block_std[0] == doctest::Approx(1e-8));
  CHECK(ex.extract(a)[0] == 0.0);
}

TEST_CASE("image branch adjoint pairs with the linear part of extraction") {
  FeatureExtractor ex;
  ex.mode = FusionMode::ImageOnly;
  ex.fcfg.image_blocks = 2;
  ex.grid_w = 4;
  ex.grid_h = 4;
  auto eng = make_engine(2024, rng_stream::kTest, 9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarGrid t1(4, 4), t2(4, 4);
  for (auto& v : t1.data) v = u(eng);
  for (auto& v : t2.data) v = u(eng);
  ex.fit_image_stats({&t1, &t2});

  ScalarGrid img(4, 4);
  for (auto& v : img.data) v = u(eng);
  std::vector<double> seed{0.3, -1.2, 0.7, 2.1};
  ScalarGrid back = ex.image_branch_adjoint(seed);
  REQUIRE(back.width == 4);

  double lhs = dot(back, img);
  auto raw = ex.raw_block_means(img);
  double rhs = 0.0;
  for (int b = 0; b < 4; ++b) rhs += seed[static_cast<std::size_t>(b)] * raw[static_cast<std::size_t>(b)] / ex.block_std[static_cast<std::size_t>(b)];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  CHECK_THROWS_AS(ex.image_branch_adjoint({0.1, 0.2}), ContractViolation);
}

TEST_CASE("best velocity stays at zero when the image matches an atlas") {
  FeatureExtractor ex;
  ex.mode = FusionMode::ShapeOnly;
  ex.geo.trunc_w = 4;
  ex.geo.trunc_h = 4;
  ex.geo.time_steps = 2;
  ex.geo.sigma = 0.1;
  ex.fcfg.feature_steps = 3;
  ex.fcfg.feature_step_size = 1e-4;
  ex.grid_w = 12;
  ex.grid_h = 12;

  ScalarGrid far(12, 12), same(12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      far.at(x, y) = 0.1 + 0.8 * std::exp(-((x - 3.0) * (x - 3.0) + (y - 3.0) * (y - 3.0)) / 8.0);
      same.at(x, y) = 0.1 + 0.8 * std::exp(-((x - 6.0) * (x - 6.0) + (y - 6.0) * (y - 6.0)) / 8.0);
    }
  ex.atlases = {far, same};
  SpectralVelocity v = ex.best_velocity(same);
  CHECK(max_abs(v) == 0.0);  // the perfect match has zero energy at zero velocity

  auto f = ex.extract(same);
  CHECK(f.size() == static_cast<std::size_t>(ex.shape_dim()));
  for (double x : f) CHECK(x == 0.0);
}

TEST_CASE("classifier initialization is seeded and sized") {
  Mlp a = Mlp::init(6, 5, 3, 42);
  Mlp b = Mlp::init(6, 5, 3, 42);
  CHECK(a.w1 == b.w1);
  CHECK(a.b1 == b.b1);
  CHECK(a.w2 == b.w2);
  CHECK(a.b2 == b.b2);
  Mlp c = Mlp::init(6, 5, 3, 43);
  CHECK(a.w1 != c.w1);
  CHECK(a.param_count() == 6 * 5 + 5 + 5 * 3 + 3);
  CHECK(a.logits(std::vector<double>(6, 0.1)).size() == 3);
  auto p = a.probabilities(std::vector<double>(6, 0.1));
  double sum = 0.0;
  for (double x : p) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(a.logits(std::vector<double>(5, 0.0)), ContractViolation);
  CHECK_THROWS_AS(Mlp::init(0, 5, 3, 1), ContractViolation);
}

TEST_CASE("training separates an xor arrangement and restores the best epoch") {
  auto eng = make_engine(7, rng_stream::kTest, 20);
  std::normal_distribution<double> jitter(0.0, 0.15);
  std::vector<std::vector<double>> train_x, val_x;
  std::vector<int> train_y, val_y;
  auto add = [&](std::vector<std::vector<double>>& xs, std::vector<int>& ys, int n) {
    for (int i = 0; i < n; ++i) {
      int cx = i % 2, cy = (i / 2) % 2;
      xs.push_back({cx + jitter(eng), cy + jitter(eng)});
      ys.push_back(cx == cy ? 0 : 1);
    }
  };
  add(train_x, train_y, 48);
  add(val_x, val_y, 16);

  Mlp mlp = Mlp::init(2, 8, 2, 11);
  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 1e-5;
  cfg.seed = 31;
  TrainReport rep = train_classifier(mlp, train_x, train_y, val_x, val_y, cfg);

  CHECK(rep.epoch_val_accuracy.size() == 120);
  CHECK(rep.best_val_accuracy ==
        *std::max_element(rep.epoch_val_accuracy.begin(), rep.epoch_val_accuracy.end()));
  CHECK(rep.best_val_accuracy >= 0.9);
  CHECK(rep.best_epoch >= 0);

  // Restored parameters must reproduce the reported best accuracy.
  int hits = 0;
  for (std::size_t i = 0; i < val_x.size(); ++i) {
    auto pr = mlp.probabilities(val_x[i]);
    int arg = static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());
    if (arg == val_y[i]) ++hits;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(val_x.size()) ==
        doctest::Approx(rep.best_val_accuracy));
}

TEST_CASE("training is deterministic and a zero loss weight freezes parameters") {
  std::vector<std::vector<double>> xs{{0.0, 0.1}, {1.0, 0.9}, {0.2, 0.3}, {0.8, 1.1}};
  std::vector<int> ys{0, 1, 0, 1};

  Mlp m1 = Mlp::init(2, 4, 2, 3);
  Mlp m2 = Mlp::init(2, 4, 2, 3);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 2;
  cfg.seed = 17;
  TrainReport r1 = train_classifier(m1, xs, ys, xs, ys, cfg);
  TrainReport r2 = train_classifier(m2, xs, ys, xs, ys, cfg);
  CHECK(m1.w1 == m2.w1);
  CHECK(m1.w2 == m2.w2);
  CHECK(r1.epoch_val_accuracy == r2.epoch_val_accuracy);

  Mlp frozen = Mlp::init(2, 4, 2, 3);
  Mlp before = frozen;
  TrainConfig off = cfg;
  off.lambda = 0.0;
  off.weight_decay = 0.0;
  train_classifier(frozen, xs, ys, xs, ys, off);
  CHECK(frozen.w1 == before.w1);
  CHECK(frozen.b1 == before.b1);
  CHECK(frozen.w2 == before.w2);
  CHECK(frozen.b2 == before.b2);

  CHECK_THROWS_AS(train_classifier(m1, xs, {0, 1}, xs, ys, cfg), ContractViolation);
  CHECK_THROWS_AS(train_classifier(m1, xs, {0, 1, 0, 5}, xs, ys, cfg), ContractViolation);
}

TEST_CASE("hand-built single-feature model exposes the saliency chain") {
  JointModel model;
  model.mode = FusionMode::ImageOnly;
  model.extractor.mode = FusionMode::ImageOnly;
  model.extractor.fcfg.image_blocks = 1;
  model.extractor.grid_w = 4;
  model.extractor.grid_h = 4;
  model.extractor.block_mean = {0.25};
  model.extractor.block_std = {0.5};

  Mlp mlp;
  mlp.in = 1;
  mlp.hidden = 2;
  mlp.out = 2;
  mlp.w1 = {0.7, -0.4};
  mlp.b1 = {0.1, 0.2};
  mlp.w2 = {0.5, -0.3, -0.6, 0.8};
  mlp.b2 = {0.05, -0.1};
  model.mlp = mlp;

  ScalarGrid img = filled(4, 4, 0.45);
  double f = (0.45 - 0.25) / 0.5;
  double z0 = std::tanh(0.7 * f + 0.1), z1 = std::tanh(-0.4 * f + 0.2);
  double l0 = 0.5 * z0 - 0.3 * z1 + 0.05;
  double l1 = -0.6 * z0 + 0.8 * z1 - 0.1;
  int want_pred = l0 >= l1 ? 0 : 1;

  SaliencyResult s = saliency(model, img);
  CHECK(s.predicted == want_pred);
  auto logits = model.mlp.logits(model.extractor.extract(img));
  CHECK(logits[0] == doctest::Approx(l0).epsilon(1e-12));
  CHECK(logits[1] == doctest::Approx(l1).epsilon(1e-12));

  // d logit_pred / d feature through both tanh units.
  double g0 = (1.0 - z0 * z0) * 0.7, g1 = (1.0 - z1 * z1) * (-0.4);
  double gf = (want_pred == 0) ? (0.5 * g0 - 0.3 * g1) : (-0.6 * g0 + 0.8 * g1);
  // The block-mean adjoint spreads gf/(16 * 0.5) uniformly over the pixels.
  double per_pixel = std::abs(gf) / 16.0 / 0.5;
  REQUIRE(s.map.width == 4);
  for (double v : s.map.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.image_attribution == doctest::Approx(per_pixel * 4.0).epsilon(1e-12));
  CHECK(s.shape_attribution == 0.0);
}

TEST_CASE("joint training fits fused and single-branch models") {
  LabeledDataset ds = sided_dataset(8, 16);
  SplitIndices split = stratified_split(ds.labels, 0.5, 0.25, 3);

  JointConfig cfg;
  cfg.atlas.geodesic.trunc_w = 4;
  cfg.atlas.geodesic.trunc_h = 4;
  cfg.atlas.geodesic.time_steps = 2;
  cfg.atlas.geodesic.sigma = 0.1;
  cfg.atlas.outer_iters = 2;
  cfg.atlas.velocity_steps = 1;
  cfg.features.image_blocks = 4;
  cfg.features.feature_steps = 1;
  cfg.features.feature_step_size = 1e-4;
  cfg.train.epochs = 40;
  cfg.train.batch_size = 4;
  cfg.train.learning_rate = 0.01;
  cfg.train.seed = 5;
  cfg.hidden = 8;
  cfg.rounds = 2;
  cfg.refine_epochs = 10;

  for (FusionMode mode : {FusionMode::ImageOnly, FusionMode::Fused, FusionMode::ShapeOnly}) {
    cfg.mode = mode;
    JointModel model = joint_train(ds, split, cfg, 77);
    CHECK(model.mode == mode);
    CHECK(model.round_val_accuracy.size() == 2);
    if (mode == FusionMode::ImageOnly) {
      CHECK(model.atlases.empty());
    } else {
      REQUIRE(model.atlases.size() == 2);
      CHECK(model.atlases[0].atlas.width == 16);
      CHECK(model.extractor.atlases.size() == 2);
    }
    CHECK(model.mlp.in == model.extractor.dim());

    MetricsReport train_metrics = evaluate_model(model, ds.images, ds.labels, split.train);
    CHECK(train_metrics.accuracy >= (mode == FusionMode::ShapeOnly ? 0.4 : 0.9));
    MetricsReport test_metrics = evaluate_model(model, ds.images, ds.labels, split.test);
    CHECK(test_metrics.accuracy >= 0.0);
    REQUIRE(test_metrics.per_class_f1.size() == 2);

    if (mode == FusionMode::ImageOnly) {
      // Same inputs, same seed: the whole pipeline is reproducible.
      JointModel again = joint_train(ds, split, cfg, 77);
      CHECK(again.mlp.w1 == model.mlp.w1);
      CHECK(again.round_val_accuracy == model.round_val_accuracy);
    }
  }
}

TEST_CASE("robustness sweep reports exact clean accuracy at zero strength") {
  LabeledDataset ds = sided_dataset(6, 16);
  SplitIndices split = stratified_split(ds.labels, 0.5, 0.25, 4);

  JointConfig cfg;
  cfg.mode = FusionMode::ImageOnly;
  cfg.features.image_blocks = 4;
  cfg.train.epochs = 25;
  cfg.train.batch_size = 4;
  cfg.train.learning_rate = 0.01;
  cfg.train.seed = 6;
  cfg.hidden = 6;
  JointModel model = joint_train(ds, split, cfg, 12);

  MetricsReport clean = evaluate_model(model, ds.images, ds.labels, split.test);
  auto sweep = robustness_sweep(model, ds.images, ds.labels, split.test, {0.0, 0.05, 0.2});
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].first == 0.0);
  CHECK(sweep[0].second == clean.accuracy);
  for (const auto& [eps, acc] : sweep) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  CHECK(sweep[1].first == 0.05);
  CHECK(sweep[2].first == 0.2);
}

TEST_CASE("split file round trip preserves the index sets") {
  TempDir tmp;
  SplitIndices split;
  split.train = {0, 2, 5, 9};
  split.val = {1, 7};
  split.test = {3, 4, 6, 8};
  std::string path = (tmp.path / "split.json").string();
  save_split(split, path);

  SplitIndices back = load_split(path);
  CHECK(back.train == split.train);
  CHECK(back.val == split.val);
  CHECK(back.test == split.test);

  write_text_file(path, "{\"train\": [0]}\n");
  CHECK_THROWS_AS(load_split(path), FormatError);
  write_text_file(path, "not json at all");
  CHECK_THROWS_AS(load_split(path), FormatError);
}

TEST_CASE("joint model directory round trip") {
  LabeledDataset ds = sided_dataset(6, 16);
  SplitIndices split = stratified_split(ds.labels, 0.5, 0.25, 9);

  JointConfig cfg;
  cfg.mode = FusionMode::Fused;
  cfg.atlas.geodesic.trunc_w = 4;
  cfg.atlas.geodesic.trunc_h = 4;
  cfg.atlas.geodesic.time_steps = 2;
  cfg.atlas.geodesic.sigma = 0.1;
  cfg.atlas.outer_iters = 1;
  cfg.atlas.velocity_steps = 1;
  cfg.features.image_blocks = 4;
  cfg.features.feature_steps = 1;
  cfg.features.feature_step_size = 1e-4;
  cfg.train.epochs = 10;
  cfg.train.batch_size = 4;
  cfg.train.learning_rate = 0.01;
  cfg.train.seed = 8;
  cfg.hidden = 6;
  JointModel model = joint_train(ds, split, cfg, 31);

  TempDir tmp;
  std::string dir = (tmp.path / "model").string();
  save_joint_model(model, dir);
  JointModel back = load_joint_model(dir);

  CHECK(back.mode == model.mode);
  // JSON holds exact doubles, so every weight and statistic returns bitwise.
  CHECK(back.mlp.in == model.mlp.in);
  CHECK(back.mlp.hidden == model.mlp.hidden);
  CHECK(back.mlp.out == model.mlp.out);
  CHECK(back.mlp.w1 == model.mlp.w1);
  CHECK(back.mlp.b1 == model.mlp.b1);
  CHECK(back.mlp.w2 == model.mlp.w2);
  CHECK(back.mlp.b2 == model.mlp.b2);
  CHECK(back.extractor.block_mean == model.extractor.block_mean);
  CHECK(back.extractor.block_std == model.extractor.block_std);
  CHECK(back.round_val_accuracy == model.round_val_accuracy);
  CHECK(back.extractor.grid_w == 16);
  CHECK(back.extractor.fcfg.feature_step_size == cfg.features.feature_step_size);
  CHECK(back.extractor.geo.trunc_w == 4);
  CHECK(back.extractor.geo.sigma == cfg.atlas.geodesic.sigma);

  // Atlas images travel as float32 grids.
  REQUIRE(back.atlases.size() == 2);
  REQUIRE(back.extractor.atlases.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    REQUIRE(back.atlases[k].atlas.width == 16);
    double worst = 0.0;
    for (std::size_t i = 0; i < back.atlases[k].atlas.data.size(); ++i)
      worst = std::max(worst, std::abs(back.atlases[k].atlas.data[i] -
                                       model.atlases[k].atlas.data[i]));
    CHECK(worst < 1e-6);
    CHECK(back.extractor.atlases[k].data == back.atlases[k].atlas.data);
  }

  // A loaded model scores images; the classifier head is identical, so an
  // image-branch-only evaluation matches exactly.
  std::vector<double> probs = back.mlp.probabilities(back.extractor.extract(ds.images[0]));
  CHECK(probs.size() == 2);

  write_text_file((std::filesystem::path(dir) / "model.json").string(), "{}\n");
  CHECK_THROWS_AS(load_joint_model(dir), FormatError);
  write_text_file((std::filesystem::path(dir) / "model.json").string(), "][");
  CHECK_THROWS_AS(load_joint_model(dir), FormatError);
}
