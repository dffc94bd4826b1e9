#include "geoshape/grid.hpp"

#include <algorithm>
#include <cmath>

namespace geoshape {

ScalarGrid::ScalarGrid(int w, int h, double fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ContractViolation("grid dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * h, fill);
}

VectorGrid::VectorGrid(int w, int h, double fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ContractViolation("grid dimensions must be positive");
  x.assign(static_cast<std::size_t>(w) * h, fill);
  y.assign(static_cast<std::size_t>(w) * h, fill);
}

bool all_finite(const ScalarGrid& g) {
  for (double v : g.data)
    if (!std::isfinite(v)) return false;
  return true;
}

bool all_finite(const VectorGrid& g) {
  for (double v : g.x)
    if (!std::isfinite(v)) return false;
  for (double v : g.y)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

struct BilinearTap {
  int x0, x1, y0, y1;
  double fx, fy;
};

inline BilinearTap tap_at(int w, int h, double sx, double sy) {
  double cx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  double cy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  int x0 = static_cast<int>(std::floor(cx));
  int y0 = static_cast<int>(std::floor(cy));
  if (x0 > w - 2) x0 = std::max(w - 2, 0);
  if (y0 > h - 2) y0 = std::max(h - 2, 0);
  BilinearTap t;
  t.x0 = x0;
  t.y0 = y0;
  t.x1 = std::min(x0 + 1, w - 1);
  t.y1 = std::min(y0 + 1, h - 1);
  t.fx = cx - x0;
  t.fy = cy - y0;
  return t;
}

}  // namespace

double sample_bilinear(const ScalarGrid& img, double sx, double sy) {
  BilinearTap t = tap_at(img.width, img.height, sx, sy);
  double top = (1.0 - t.fx) * img.at(t.x0, t.y0) + t.fx * img.at(t.x1, t.y0);
  double bot = (1.0 - t.fx) * img.at(t.x0, t.y1) + t.fx * img.at(t.x1, t.y1);
  return (1.0 - t.fy) * top + t.fy * bot;
}

ScalarGrid warp(const ScalarGrid& img, const DeformationField& def) {
  if (img.width != def.width() || img.height != def.height())
    throw ContractViolation("warp: image and deformation shapes differ");
  ScalarGrid out(img.width, img.height);
  const int w = img.width, h = img.height;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      out.data[i] = sample_bilinear(img, x + def.displacement.x[i], y + def.displacement.y[i]);
    }
  }
  return out;
}

ScalarGrid splat(const ScalarGrid& residual, const DeformationField& def) {
  if (residual.width != def.width() || residual.height != def.height())
    throw ContractViolation("splat: residual and deformation shapes differ");
  ScalarGrid out(residual.width, residual.height);
  const int w = residual.width, h = residual.height;
  // Scatter: kept serial so accumulation order is fixed.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      BilinearTap t = tap_at(w, h, x + def.displacement.x[i], y + def.displacement.y[i]);
      double r = residual.data[i];
      out.at(t.x0, t.y0) += (1.0 - t.fx) * (1.0 - t.fy) * r;
      out.at(t.x1, t.y0) += t.fx * (1.0 - t.fy) * r;
      out.at(t.x0, t.y1) += (1.0 - t.fx) * t.fy * r;
      out.at(t.x1, t.y1) += t.fx * t.fy * r;
    }
  }
  return out;
}

VectorGrid warp_position_gradient(const ScalarGrid& img, const DeformationField& def,
                                  const ScalarGrid& seed) {
  if (img.width != def.width() || img.height != def.height() || !img.same_shape(seed))
    throw ContractViolation("warp_position_gradient: shape mismatch");
  VectorGrid out(img.width, img.height);
  const int w = img.width, h = img.height;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      double sx = x + def.displacement.x[i];
      double sy = y + def.displacement.y[i];
      BilinearTap t = tap_at(w, h, sx, sy);
      // Derivative of the clamp is zero outside the rectangle.
      double inx = (sx >= 0.0 && sx <= w - 1) ? 1.0 : 0.0;
      double iny = (sy >= 0.0 && sy <= h - 1) ? 1.0 : 0.0;
      double gx = (1.0 - t.fy) * (img.at(t.x1, t.y0) - img.at(t.x0, t.y0)) +
                  t.fy * (img.at(t.x1, t.y1) - img.at(t.x0, t.y1));
      double gy = (1.0 - t.fx) * (img.at(t.x0, t.y1) - img.at(t.x0, t.y0)) +
                  t.fx * (img.at(t.x1, t.y1) - img.at(t.x1, t.y0));
      out.x[i] = seed.data[i] * gx * inx;
      out.y[i] = seed.data[i] * gy * iny;
    }
  }
  return out;
}

void diff_x(const double* f, double* out, int w, int h) {
  if (w < 2) throw ContractViolation("diff_x: width must be >= 2");
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* row = f + static_cast<std::size_t>(y) * w;
    double* o = out + static_cast<std::size_t>(y) * w;
    o[0] = row[1] - row[0];
    for (int x = 1; x < w - 1; ++x) o[x] = 0.5 * (row[x + 1] - row[x - 1]);
    o[w - 1] = row[w - 1] - row[w - 2];
  }
}

void diff_y(const double* f, double* out, int w, int h) {
  if (h < 2) throw ContractViolation("diff_y: height must be >= 2");
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* up = f + static_cast<std::size_t>(std::max(y - 1, 0)) * w;
    const double* dn = f + static_cast<std::size_t>(std::min(y + 1, h - 1)) * w;
    double* o = out + static_cast<std::size_t>(y) * w;
    double scale = (y == 0 || y == h - 1) ? 1.0 : 0.5;
    for (int x = 0; x < w; ++x) o[x] = scale * (dn[x] - up[x]);
  }
}

// Transposes are written as scatters that mirror the forward reads, so they
// stay exact adjoints for every width/height, including w == 2 or 3.
void diff_x_adjoint(const double* f, double* out, int w, int h) {
  if (w < 2) throw ContractViolation("diff_x_adjoint: width must be >= 2");
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* row = f + static_cast<std::size_t>(y) * w;
    double* o = out + static_cast<std::size_t>(y) * w;
    std::fill(o, o + w, 0.0);
    o[1] += row[0];
    o[0] -= row[0];
    for (int x = 1; x < w - 1; ++x) {
      o[x + 1] += 0.5 * row[x];
      o[x - 1] -= 0.5 * row[x];
    }
    o[w - 1] += row[w - 1];
    o[w - 2] -= row[w - 1];
  }
}

void diff_y_adjoint(const double* f, double* out, int w, int h) {
  if (h < 2) throw ContractViolation("diff_y_adjoint: height must be >= 2");
  std::fill(out, out + static_cast<std::size_t>(w) * h, 0.0);
  // Column scatter; parallel over x keeps writes disjoint.
#pragma omp parallel for schedule(static)
  for (int x = 0; x < w; ++x) {
    auto idx = [&](int yy) { return static_cast<std::size_t>(yy) * w + x; };
    out[idx(1)] += f[idx(0)];
    out[idx(0)] -= f[idx(0)];
    for (int y = 1; y < h - 1; ++y) {
      out[idx(y + 1)] += 0.5 * f[idx(y)];
      out[idx(y - 1)] -= 0.5 * f[idx(y)];
    }
    out[idx(h - 1)] += f[idx(h - 1)];
    out[idx(h - 2)] -= f[idx(h - 1)];
  }
}

ScalarGrid gradient_x(const ScalarGrid& g) {
  ScalarGrid out(g.width, g.height);
  diff_x(g.data.data(), out.data.data(), g.width, g.height);
  return out;
}

ScalarGrid gradient_y(const ScalarGrid& g) {
  ScalarGrid out(g.width, g.height);
  diff_y(g.data.data(), out.data.data(), g.width, g.height);
  return out;
}

ScalarGrid jacobian_determinant(const DeformationField& def) {
  const VectorGrid& u = def.displacement;
  const int w = u.width, h = u.height;
  ScalarGrid dxux(w, h), dyux(w, h), dxuy(w, h), dyuy(w, h);
  diff_x(u.x.data(), dxux.data.data(), w, h);
  diff_y(u.x.data(), dyux.data.data(), w, h);
  diff_x(u.y.data(), dxuy.data.data(), w, h);
  diff_y(u.y.data(), dyuy.data.data(), w, h);
  ScalarGrid out(w, h);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(out.size()); ++i)
    out.data[i] = (1.0 + dxux.data[i]) * (1.0 + dyuy.data[i]) - dyux.data[i] * dxuy.data[i];
  return out;
}

VectorGrid jacobian_times(const VectorGrid& u, const VectorGrid& v) {
  if (!u.same_shape(v)) throw ContractViolation("jacobian_times: shape mismatch");
  const int w = u.width, h = u.height;
  VectorGrid d(w, h), out(w, h);
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  diff_x(u.x.data(), d.x.data(), w, h);
  diff_y(u.x.data(), tmp.data(), w, h);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(out.size()); ++i)
    out.x[i] = d.x[i] * v.x[i] + tmp[i] * v.y[i];
  diff_x(u.y.data(), d.y.data(), w, h);
  diff_y(u.y.data(), tmp.data(), w, h);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(out.size()); ++i)
    out.y[i] = d.y[i] * v.x[i] + tmp[i] * v.y[i];
  return out;
}

VectorGrid jacobian_transpose_times(const VectorGrid& u, const VectorGrid& seed) {
  if (!u.same_shape(seed)) throw ContractViolation("jacobian_transpose_times: shape mismatch");
  const int w = u.width, h = u.height;
  ScalarGrid dxux(w, h), dyux(w, h), dxuy(w, h), dyuy(w, h);
  diff_x(u.x.data(), dxux.data.data(), w, h);
  diff_y(u.x.data(), dyux.data.data(), w, h);
  diff_x(u.y.data(), dxuy.data.data(), w, h);
  diff_y(u.y.data(), dyuy.data.data(), w, h);
  VectorGrid out(w, h);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(out.size()); ++i) {
    out.x[i] = dxux.data[i] * seed.x[i] + dxuy.data[i] * seed.y[i];
    out.y[i] = dyux.data[i] * seed.x[i] + dyuy.data[i] * seed.y[i];
  }
  return out;
}

VectorGrid jacobian_times_adjoint_u(const VectorGrid& seed, const VectorGrid& v) {
  if (!seed.same_shape(v)) throw ContractViolation("jacobian_times_adjoint_u: shape mismatch");
  const int w = seed.width, h = seed.height;
  std::vector<double> prod(static_cast<std::size_t>(w) * h), tmp(prod.size());
  VectorGrid out(w, h);
  // out_c = diff_x^T(seed_c * v_x) + diff_y^T(seed_c * v_y), per channel c.
  for (int c = 0; c < 2; ++c) {
    const std::vector<double>& s = (c == 0) ? seed.x : seed.y;
    std::vector<double>& o = (c == 0) ? out.x : out.y;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(prod.size()); ++i) prod[i] = s[i] * v.x[i];
    diff_x_adjoint(prod.data(), o.data(), w, h);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(prod.size()); ++i) prod[i] = s[i] * v.y[i];
    diff_y_adjoint(prod.data(), tmp.data(), w, h);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(prod.size()); ++i) o[i] += tmp[i];
  }
  return out;
}

double dot(const ScalarGrid& a, const ScalarGrid& b) {
  if (!a.same_shape(b)) throw ContractViolation("dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

double dot(const VectorGrid& a, const VectorGrid& b) {
  if (!a.same_shape(b)) throw ContractViolation("dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.x[i] * b.x[i] + a.y[i] * b.y[i];
  return acc;
}

double max_abs_diff(const ScalarGrid& a, const ScalarGrid& b) {
  if (!a.same_shape(b)) throw ContractViolation("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double max_abs_diff(const VectorGrid& a, const VectorGrid& b) {
  if (!a.same_shape(b)) throw ContractViolation("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.x[i] - b.x[i]));
    m = std::max(m, std::abs(a.y[i] - b.y[i]));
  }
  return m;
}

double sum_squared_diff(const ScalarGrid& a, const ScalarGrid& b) {
  if (!a.same_shape(b)) throw ContractViolation("sum_squared_diff: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace geoshape
