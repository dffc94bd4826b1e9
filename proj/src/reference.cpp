#include "geoshape/reference.hpp"

#include <algorithm>
#include <cmath>

namespace geoshape::reference {

namespace {

double sample(const ScalarGrid& img, double sx, double sy, double* gx = nullptr,
              double* gy = nullptr) {
  const int w = img.width, h = img.height;
  double cx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  double cy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  int x0 = static_cast<int>(std::floor(cx));
  int y0 = static_cast<int>(std::floor(cy));
  if (x0 > w - 2) x0 = std::max(w - 2, 0);
  if (y0 > h - 2) y0 = std::max(h - 2, 0);
  int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  double fx = cx - x0, fy = cy - y0;
  double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  if (gx) {
    double inx = (sx >= 0.0 && sx <= w - 1) ? 1.0 : 0.0;
    double iny = (sy >= 0.0 && sy <= h - 1) ? 1.0 : 0.0;
    *gx = ((1.0 - fy) * (img.at(x1, y0) - img.at(x0, y0)) +
           fy * (img.at(x1, y1) - img.at(x0, y1))) *
          inx;
    *gy = ((1.0 - fx) * (img.at(x0, y1) - img.at(x0, y0)) +
           fx * (img.at(x1, y1) - img.at(x1, y0))) *
          iny;
  }
  return (1.0 - fy) * top + fy * bot;
}

}  // namespace

ScalarGrid warp(const ScalarGrid& img, const DeformationField& def) {
  ScalarGrid out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      out.data[i] = sample(img, x + def.displacement.x[i], y + def.displacement.y[i]);
    }
  return out;
}

VectorGrid warp_position_gradient(const ScalarGrid& img, const DeformationField& def,
                                  const ScalarGrid& seed) {
  VectorGrid out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      double gx, gy;
      sample(img, x + def.displacement.x[i], y + def.displacement.y[i], &gx, &gy);
      out.x[i] = seed.data[i] * gx;
      out.y[i] = seed.data[i] * gy;
    }
  return out;
}

void diff_x(const double* f, double* out, int w, int h) {
  for (int y = 0; y < h; ++y) {
    const double* row = f + static_cast<std::size_t>(y) * w;
    double* o = out + static_cast<std::size_t>(y) * w;
    o[0] = row[1] - row[0];
    for (int x = 1; x < w - 1; ++x) o[x] = 0.5 * (row[x + 1] - row[x - 1]);
    o[w - 1] = row[w - 1] - row[w - 2];
  }
}

void diff_y(const double* f, double* out, int w, int h) {
  for (int y = 0; y < h; ++y) {
    const double* up = f + static_cast<std::size_t>(std::max(y - 1, 0)) * w;
    const double* dn = f + static_cast<std::size_t>(std::min(y + 1, h - 1)) * w;
    double* o = out + static_cast<std::size_t>(y) * w;
    double scale = (y == 0 || y == h - 1) ? 1.0 : 0.5;
    for (int x = 0; x < w; ++x) o[x] = scale * (dn[x] - up[x]);
  }
}

ScalarGrid jacobian_determinant(const DeformationField& def) {
  const VectorGrid& u = def.displacement;
  const int w = u.width, h = u.height;
  std::vector<double> dxux(u.size()), dyux(u.size()), dxuy(u.size()), dyuy(u.size());
  diff_x(u.x.data(), dxux.data(), w, h);
  diff_y(u.x.data(), dyux.data(), w, h);
  diff_x(u.y.data(), dxuy.data(), w, h);
  diff_y(u.y.data(), dyuy.data(), w, h);
  ScalarGrid out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = (1.0 + dxux[i]) * (1.0 + dyuy[i]) - dyux[i] * dxuy[i];
  return out;
}

VectorGrid jacobian_times(const VectorGrid& u, const VectorGrid& v) {
  const int w = u.width, h = u.height;
  std::vector<double> dx(u.size()), dy(u.size());
  VectorGrid out(w, h);
  diff_x(u.x.data(), dx.data(), w, h);
  diff_y(u.x.data(), dy.data(), w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out.x[i] = dx[i] * v.x[i] + dy[i] * v.y[i];
  diff_x(u.y.data(), dx.data(), w, h);
  diff_y(u.y.data(), dy.data(), w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out.y[i] = dx[i] * v.x[i] + dy[i] * v.y[i];
  return out;
}

VectorGrid jacobian_transpose_times(const VectorGrid& u, const VectorGrid& seed) {
  const int w = u.width, h = u.height;
  std::vector<double> dxux(u.size()), dyux(u.size()), dxuy(u.size()), dyuy(u.size());
  diff_x(u.x.data(), dxux.data(), w, h);
  diff_y(u.x.data(), dyux.data(), w, h);
  diff_x(u.y.data(), dxuy.data(), w, h);
  diff_y(u.y.data(), dyuy.data(), w, h);
  VectorGrid out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.x[i] = dxux[i] * seed.x[i] + dxuy[i] * seed.y[i];
    out.y[i] = dyux[i] * seed.x[i] + dyuy[i] * seed.y[i];
  }
  return out;
}

}  // namespace geoshape::reference
