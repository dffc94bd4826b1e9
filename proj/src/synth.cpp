#include "geoshape/synth.hpp"

#include <cmath>
#include <numbers>

#include "geoshape/parallel.hpp"
#include "geoshape/rng.hpp"
#include "geoshape/spectral.hpp"

namespace geoshape {

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Square: return "square";
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::Cross: return "cross";
    case ShapeKind::Annulus: return "annulus";
  }
  throw ContractViolation("unknown shape kind");
}

ShapeKind shape_from_name(const std::string& name) {
  for (ShapeKind k : {ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle, ShapeKind::Cross,
                      ShapeKind::Annulus})
    if (name == shape_name(k)) return k;
  throw ConfigError("unknown shape name \"" + name + "\"");
}

namespace {

// Farthest boundary point from the center, as a multiple of radius.
double extent_factor(ShapeKind k) {
  switch (k) {
    case ShapeKind::Circle: return 1.0;
    case ShapeKind::Square: return std::numbers::sqrt2;
    case ShapeKind::Triangle: return 1.16;
    case ShapeKind::Cross: return 1.07;
    case ShapeKind::Annulus: return 1.0;
  }
  return 1.0;
}

double box_sdf(double px, double py, double hx, double hy) {
  double dx = std::abs(px) - hx, dy = std::abs(py) - hy;
  double ox = std::max(dx, 0.0), oy = std::max(dy, 0.0);
  return std::hypot(ox, oy) + std::min(std::max(dx, dy), 0.0);
}

}  // namespace

void ShapeSpec::validate() const {
  if (canvas < 16) throw ConfigError("shape: canvas too small");
  if (radius <= 0.0 || softness <= 0.0)
    throw ConfigError("shape: radius and softness must be positive");
  if (radius * extent_factor(kind) > canvas / 2.0 - 4.0)
    throw ConfigError("shape: must fit the canvas with a 4 px margin");
}

double shape_sdf(ShapeKind kind, double r, double px, double py) {
  switch (kind) {
    case ShapeKind::Circle:
      return std::hypot(px, py) - r;
    case ShapeKind::Square:
      return box_sdf(px, py, r, r);
    case ShapeKind::Triangle: {
      const double k = std::numbers::sqrt3;
      double x = std::abs(px) - r;
      double y = py + r / k;
      if (x + k * y > 0.0) {
        double nx = 0.5 * (x - k * y);
        double ny = 0.5 * (-k * x - y);
        x = nx;
        y = ny;
      }
      x -= std::clamp(x, -2.0 * r, 0.0);
      double s = (y > 0.0) ? 1.0 : ((y < 0.0) ? -1.0 : 0.0);
      return -std::hypot(x, y) * s;
    }
    case ShapeKind::Cross:
      return std::min(box_sdf(px, py, r, 0.35 * r), box_sdf(px, py, 0.35 * r, r));
    case ShapeKind::Annulus:
      return std::abs(std::hypot(px, py) - 0.7 * r) - 0.3 * r;
  }
  throw ContractViolation("unknown shape kind");
}

namespace {

inline double edge_profile(double sdf, double softness) {
  return 0.5 * std::erfc(sdf / (std::numbers::sqrt2 * softness));
}

}  // namespace

ScalarGrid canonical_render(const ShapeSpec& spec) {
  spec.validate();
  ScalarGrid img(spec.canvas, spec.canvas);
  const double cx = 0.5 * (spec.canvas - 1), cy = 0.5 * (spec.canvas - 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < spec.canvas; ++y)
    for (int x = 0; x < spec.canvas; ++x)
      img.at(x, y) =
          edge_profile(shape_sdf(spec.kind, spec.radius, x - cx, y - cy), spec.softness);
  return img;
}

void PerturbationSpec::validate(int canvas) const {
  if (max_rotation_deg < 0.0 || max_translation < 0.0 || max_log_scale < 0.0 ||
      warp_amplitude < 0.0 || noise_std < 0.0)
    throw ConfigError("perturbation: parameters must be non-negative");
  if (warp_cutoff < 0) throw ConfigError("perturbation: warp cutoff must be >= 0");
  if (warp_amplitude * 2.0 * std::numbers::pi * warp_cutoff / canvas >= 0.9)
    throw ConfigError("perturbation: warp amplitude/cutoff would risk a folding warp");
}

namespace {

// Smooth random displacement field: Gaussian spectrum on |k| <= cutoff,
// scaled so the max displacement magnitude equals amp.
VectorGrid sample_warp_field(std::mt19937_64& eng, int canvas, int cutoff, double amp) {
  VectorGrid w(canvas, canvas, 0.0);
  if (amp <= 0.0 || cutoff < 1) return w;
  int extent = 2 * cutoff + 1;
  SpectralVelocity coeffs(extent, extent);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < coeffs.x.c.size(); ++i) {
    coeffs.x.c[i] = std::complex<double>(gauss(eng), gauss(eng));
    coeffs.y.c[i] = std::complex<double>(gauss(eng), gauss(eng));
  }
  hermitian_project(coeffs);
  VectorGrid raw = to_spatial(coeffs, canvas, canvas);
  double peak = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i)
    peak = std::max(peak, std::hypot(raw.x[i], raw.y[i]));
  if (peak < 1e-12) return w;
  double s = amp / peak;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    w.x[i] = s * raw.x[i];
    w.y[i] = s * raw.y[i];
  }
  return w;
}

// Shape-frame sample positions: inverse affine plus a smooth displacement.
VectorGrid shape_frame_positions(int n, const PerturbationParams& p) {
  const double c = 0.5 * (n - 1);
  const double scale = std::exp(p.log_scale);
  const double ct = std::cos(-p.rotation_rad), st = std::sin(-p.rotation_rad);
  const bool warped = !p.warp.x.empty();
  VectorGrid q(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * n + x;
      double rx = x - c - p.tx, ry = y - c - p.ty;
      q.x[i] = (ct * rx - st * ry) / scale + (warped ? p.warp.x[i] : 0.0);
      q.y[i] = (st * rx + ct * ry) / scale + (warped ? p.warp.y[i] : 0.0);
    }
  return q;
}

// Invertibility check: det(Dq) > 0 everywhere, via the same finite
// differences used elsewhere in the library.
bool positions_invertible(const VectorGrid& q, int n) {
  std::vector<double> dxx(q.size()), dyx(q.size()), dxy(q.size()), dyy(q.size());
  diff_x(q.x.data(), dxx.data(), n, n);
  diff_y(q.x.data(), dyx.data(), n, n);
  diff_x(q.y.data(), dxy.data(), n, n);
  diff_y(q.y.data(), dyy.data(), n, n);
  for (std::size_t i = 0; i < q.size(); ++i)
    if (dxx[i] * dyy[i] - dyx[i] * dxy[i] <= 0.0) return false;
  return true;
}

ScalarGrid render_positions(const ShapeSpec& shape, const VectorGrid& q) {
  const int n = shape.canvas;
  ScalarGrid img(n, n);
  for (std::size_t i = 0; i < q.size(); ++i)
    img.data[i] = std::clamp(
        edge_profile(shape_sdf(shape.kind, shape.radius, q.x[i], q.y[i]), shape.softness), 0.0,
        1.0);
  return img;
}

}  // namespace

ScalarGrid render_perturbed(const ShapeSpec& shape, const PerturbationParams& params) {
  shape.validate();
  if (!params.warp.x.empty() &&
      (params.warp.width != shape.canvas || params.warp.height != shape.canvas))
    throw ContractViolation("render_perturbed: warp field does not match the canvas");
  VectorGrid q = shape_frame_positions(shape.canvas, params);
  if (!positions_invertible(q, shape.canvas))
    throw ContractViolation("render_perturbed: deformation folds");
  return render_positions(shape, q);
}

SampleResult generate_sample(const ShapeSpec& shape, const PerturbationSpec& pert,
                             std::uint64_t seed, std::uint64_t index) {
  shape.validate();
  pert.validate(shape.canvas);
  const int n = shape.canvas;

  SampleResult out;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 32)
      throw ContractViolation("generate_sample: could not draw an invertible deformation");
    std::mt19937_64 eng =
        make_engine(seed, rng_stream::kSynthSample, index * 64 + static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);
    PerturbationParams p;
    p.rotation_rad = uni(eng) * pert.max_rotation_deg * std::numbers::pi / 180.0;
    p.tx = uni(eng) * pert.max_translation;
    p.ty = uni(eng) * pert.max_translation;
    p.log_scale = uni(eng) * pert.max_log_scale;
    double amp = uni01(eng) * pert.warp_amplitude;
    p.warp = sample_warp_field(eng, n, pert.warp_cutoff, amp);

    VectorGrid q = shape_frame_positions(n, p);
    if (!positions_invertible(q, n)) {
      ++out.redraws;
      continue;
    }

    ScalarGrid img = render_positions(shape, q);
    if (pert.noise_std > 0.0) {
      std::normal_distribution<double> noise(0.0, pert.noise_std);
      for (double& v : img.data) v = std::clamp(v + noise(eng), 0.0, 1.0);
    }
    out.image = std::move(img);
    return out;
  }
}

SynthConfig default_synth_config(int per_class, std::uint64_t seed) {
  SynthConfig cfg;
  for (ShapeKind k : {ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle, ShapeKind::Cross,
                      ShapeKind::Annulus}) {
    ShapeSpec s;
    s.kind = k;
    s.canvas = 64;
    s.radius = (k == ShapeKind::Square) ? 13.0 : 16.0;
    s.softness = 1.0;
    cfg.classes.push_back(s);
  }
  cfg.per_class = per_class;
  cfg.seed = seed;
  return cfg;
}

SynthResult generate_dataset(const SynthConfig& cfg) {
  if (cfg.classes.empty()) throw ContractViolation("generate_dataset: no classes");
  if (cfg.per_class < 1) throw ContractViolation("generate_dataset: per_class must be >= 1");
  // Validate up front: exceptions cannot cross the parallel region below.
  for (const ShapeSpec& c : cfg.classes) {
    c.validate();
    cfg.pert.validate(c.canvas);
  }
  SynthResult out;
  const std::size_t total = cfg.classes.size() * static_cast<std::size_t>(cfg.per_class);
  out.images.resize(total);
  out.labels.resize(total);
  std::vector<int> redraws(total, 0);
  parallel_for_each(static_cast<long>(total), [&](long i) {
    std::size_t cls = static_cast<std::size_t>(i) / cfg.per_class;
    SampleResult s = generate_sample(cfg.classes[cls], cfg.pert, cfg.seed,
                                     static_cast<std::uint64_t>(i));
    out.images[i] = std::move(s.image);
    out.labels[i] = static_cast<int>(cls);
    redraws[i] = s.redraws;
  });
  for (int r : redraws) out.redraws += r;
  return out;
}

}  // namespace geoshape
