#include "geoshape/atlas.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>

#include "geoshape/image_io.hpp"
#include "geoshape/parallel.hpp"
#include "geoshape/reduce.hpp"
#include "geoshape/rng.hpp"

namespace geoshape {

namespace fs = std::filesystem;

void AtlasConfig::validate() const {
  if (outer_iters < 1) throw ConfigError("atlas: outer_iters must be >= 1");
  if (velocity_steps < 0 || atlas_steps < 0)
    throw ConfigError("atlas: step counts must be non-negative");
  if (velocity_step_size <= 0.0 || atlas_step_size <= 0.0)
    throw ConfigError("atlas: step sizes must be positive");
}

RegistrationResult register_image(const ScalarGrid& atlas, const ScalarGrid& target,
                                  const SpectralVelocity& init, int steps, double step_size,
                                  const GeodesicConfig& cfg, int max_halvings) {
  if (steps < 0) throw ContractViolation("register_image: steps must be non-negative");
  if (step_size <= 0.0) throw ContractViolation("register_image: step size must be positive");

  RegistrationResult res;
  res.velocity = init;
  hermitian_project(res.velocity);
  res.last_step_size = step_size;

  MatchGradient g = energy_gradient(atlas, target, res.velocity, cfg);
  EnergyTerms cur = g.energy;
  res.trace.push_back(cur.total);

  double step = step_size;
  for (int k = 0; k < steps; ++k) {
    bool accepted = false;
    double cand_total = std::numeric_limits<double>::quiet_NaN();
    for (int halv = 0; halv <= max_halvings; ++halv) {
      SpectralVelocity cand = res.velocity;
      axpy(cand, -step, g.grad_v);
      EnergyTerms e;
      bool finite = true;
      try {
        e = matching_energy(atlas, target, cand, cfg);
      } catch (const DivergenceError&) {
        finite = false;
      }
      cand_total = finite ? e.total : std::numeric_limits<double>::quiet_NaN();
      if (finite && e.total < cur.total) {
        res.velocity = std::move(cand);
        cur = e;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(cand_total))
        throw DivergenceError("registration energy non-finite at minimal step", k);
      break;  // stationary: the same gradient cannot make progress next step
    }
    res.trace.push_back(cur.total);
    res.last_step_size = step;
    step *= 2.0;
    if (k + 1 < steps) g = energy_gradient(atlas, target, res.velocity, cfg);
  }
  res.final_energy = cur;
  return res;
}

namespace {

ScalarGrid pixelwise_mean(const std::vector<ScalarGrid>& images) {
  std::vector<const double*> bufs;
  bufs.reserve(images.size());
  for (const ScalarGrid& im : images) bufs.push_back(im.data.data());
  ScalarGrid out(images[0].width, images[0].height);
  sorted_sum_stack(bufs, out.size(), out.data.data());
  double inv = 1.0 / static_cast<double>(images.size());
  for (double& v : out.data) v *= inv;
  return out;
}

}  // namespace

AtlasModel build_atlas(const std::vector<ScalarGrid>& images, const AtlasConfig& cfg,
                       const ScalarGrid* init_atlas, const std::vector<SpectralVelocity>* init_velocities) {
  cfg.validate();
  if (images.empty()) throw ContractViolation("build_atlas: need at least one image");
  const int W = images[0].width, H = images[0].height;
  for (const ScalarGrid& im : images) {
    if (im.width != W || im.height != H) throw ContractViolation("build_atlas: image shapes differ");
    if (!all_finite(im)) throw ContractViolation("build_atlas: non-finite input image");
  }
  const GeodesicConfig& geo = cfg.geodesic;
  geo.validate(W, H);
  const std::size_t N = images.size();
  const double inv_s2 = 1.0 / (geo.sigma * geo.sigma);

  AtlasModel model;
  model.atlas = init_atlas ? *init_atlas : pixelwise_mean(images);
  if (init_atlas && (init_atlas->width != W || init_atlas->height != H))
    throw ContractViolation("build_atlas: init atlas shape mismatch");
  if (init_velocities) {
    if (init_velocities->size() != N)
      throw ContractViolation("build_atlas: init velocity count mismatch");
    model.velocities = *init_velocities;
  } else {
    model.velocities.assign(N, SpectralVelocity(geo.trunc_w, geo.trunc_h));
  }

  std::vector<double> vel_step(N, cfg.velocity_step_size);
  double atlas_step = cfg.atlas_step_size;

  double prev_total = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int it = 0; it < cfg.outer_iters; ++it) {
    // Velocity phase: images are independent given the atlas.
    if (cfg.velocity_steps > 0) {
      parallel_for_each(static_cast<long>(N), [&](long i) {
        RegistrationResult r = register_image(model.atlas, images[i], model.velocities[i],
                                              cfg.velocity_steps, vel_step[i], geo,
                                              cfg.max_halvings);
        model.velocities[i] = std::move(r.velocity);
        vel_step[i] = r.last_step_size;
      });
    }

    // Flows depend only on the velocities, so they are computed once per
    // outer iteration and reused across atlas line-search probes.
    std::vector<DeformationField> flows(N);
    parallel_for_each(static_cast<long>(N),
                      [&](long i) { flows[i] = shoot_inverse_flow(model.velocities[i], geo, W, H); });

    std::vector<double> data_terms(N);
    auto eval_data = [&](const ScalarGrid& candidate) {
#pragma omp parallel for schedule(dynamic)
      for (long i = 0; i < static_cast<long>(N); ++i)
        data_terms[i] = inv_s2 * sum_squared_diff(warp(candidate, flows[i]), images[i]);
      return sorted_sum(data_terms);
    };

    double cur_data = eval_data(model.atlas);
    for (int a_it = 0; a_it < cfg.atlas_steps; ++a_it) {
      std::vector<ScalarGrid> grads(N);
#pragma omp parallel for schedule(dynamic)
      for (long i = 0; i < static_cast<long>(N); ++i) {
        ScalarGrid warped = warp(model.atlas, flows[i]);
        ScalarGrid r(W, H);
        for (std::size_t px = 0; px < r.size(); ++px)
          r.data[px] = 2.0 * inv_s2 * (warped.data[px] - images[i].data[px]);
        grads[i] = splat(r, flows[i]);
      }
      std::vector<const double*> bufs(N);
      for (std::size_t i = 0; i < N; ++i) bufs[i] = grads[i].data.data();
      ScalarGrid G(W, H);
      sorted_sum_stack(bufs, G.size(), G.data.data());

      double step = atlas_step;
      for (int halv = 0; halv <= cfg.max_halvings; ++halv) {
        ScalarGrid cand(W, H);
        for (std::size_t px = 0; px < cand.size(); ++px)
          cand.data[px] = std::max(0.0, model.atlas.data[px] - step * G.data[px]);
        double cand_data = eval_data(cand);
        if (std::isfinite(cand_data) && cand_data < cur_data) {
          model.atlas = std::move(cand);
          cur_data = cand_data;
          atlas_step = step * 2.0;
          break;
        }
        step *= 0.5;
      }
    }

    SobolevOperator op = geo.make_operator(W, H);
    std::vector<double> reg_terms(N);
    for (std::size_t i = 0; i < N; ++i)
      reg_terms[i] = kinetic_energy(model.velocities[i], op);
    EnergyRow row;
    row.data = eval_data(model.atlas);
    row.reg = sorted_sum(reg_terms);
    row.total = row.data + row.reg;
    model.energy_history.push_back(row);

    if (std::isfinite(prev_total)) {
      double rel = (prev_total - row.total) / std::max(std::abs(prev_total), 1e-300);
      stall = (rel < cfg.early_stop_rel) ? stall + 1 : 0;
      if (stall >= cfg.early_stop_patience) break;
    }
    prev_total = row.total;
  }
  return model;
}

double sharpness(const ScalarGrid& img, int patch_size, int n_patches, std::uint64_t seed) {
  if (patch_size < 2 || patch_size > img.width || patch_size > img.height)
    throw ContractViolation("sharpness: patch size out of range");
  if (n_patches < 1) throw ContractViolation("sharpness: n_patches must be >= 1");
  std::mt19937_64 eng = make_engine(seed, rng_stream::kSharpness);
  std::uniform_int_distribution<int> dx(0, img.width - patch_size);
  std::uniform_int_distribution<int> dy(0, img.height - patch_size);
  const double n = static_cast<double>(patch_size) * patch_size;
  double acc = 0.0;
  long draws = 0;
  const long max_draws = 50L * n_patches;
  for (int k = 0; k < n_patches; ++k) {
    double mean = 0.0, sd = 0.0;
    while (true) {
      if (++draws > max_draws)
        throw ContractViolation("sharpness: could not find patches with non-negligible mean");
      int x0 = dx(eng), y0 = dy(eng);
      double s = 0.0, s2 = 0.0;
      for (int y = y0; y < y0 + patch_size; ++y)
        for (int x = x0; x < x0 + patch_size; ++x) {
          double v = img.at(x, y);
          s += v;
          s2 += v * v;
        }
      mean = s / n;
      if (std::abs(mean) < 1e-8) continue;
      double var = (s2 - s * s / n) / (n - 1.0);
      sd = std::sqrt(std::max(var, 0.0));
      break;
    }
    acc += sd / mean;
  }
  return acc / n_patches;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

void save_atlas_model(const AtlasModel& model, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "velocities");
  write_scalar_gsf(model.atlas, (fs::path(dir) / "atlas.gsf").string());
  for (std::size_t i = 0; i < model.velocities.size(); ++i) {
    std::ostringstream name;
    name << std::setw(3) << std::setfill('0') << i << ".gsf";
    write_velocity(model.velocities[i], (fs::path(dir) / "velocities" / name.str()).string());
  }
  std::string csv = "iteration,data_term,reg_term,total\n";
  for (std::size_t i = 0; i < model.energy_history.size(); ++i) {
    const EnergyRow& r = model.energy_history[i];
    csv += std::to_string(i) + "," + fmt_double(r.data) + "," + fmt_double(r.reg) + "," +
           fmt_double(r.total) + "\n";
  }
  write_text_file((fs::path(dir) / "energy.csv").string(), csv);
}

AtlasModel load_atlas_model(const std::string& dir) {
  AtlasModel model;
  model.atlas = read_scalar_gsf((fs::path(dir) / "atlas.gsf").string());
  fs::path vdir = fs::path(dir) / "velocities";
  std::vector<std::string> names;
  if (fs::exists(vdir))
    for (const auto& e : fs::directory_iterator(vdir))
      if (e.path().extension() == ".gsf") names.push_back(e.path().string());
  std::sort(names.begin(), names.end());
  for (const std::string& p : names) model.velocities.push_back(read_velocity(p));

  std::string csv = read_text_file((fs::path(dir) / "energy.csv").string());
  std::istringstream in(csv);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != "iteration,data_term,reg_term,total")
        throw FormatError((fs::path(dir) / "energy.csv").string(), 0, "unexpected header");
      continue;
    }
    std::istringstream ls(line);
    std::string tok;
    EnergyRow r;
    std::getline(ls, tok, ',');  // iteration index, implicit by order
    std::getline(ls, tok, ',');
    r.data = std::stod(tok);
    std::getline(ls, tok, ',');
    r.reg = std::stod(tok);
    std::getline(ls, tok, ',');
    r.total = std::stod(tok);
    model.energy_history.push_back(r);
  }
  return model;
}

}  // namespace geoshape
