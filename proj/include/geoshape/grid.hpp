#pragma once
#include <cstddef>
#include <vector>

#include "geoshape/errors.hpp"

namespace geoshape {

// Row-major scalar field on a regular 2-d grid, unit spacing.
struct ScalarGrid {
  int width = 0, height = 0;
  std::vector<double> data;

  ScalarGrid() = default;
  ScalarGrid(int w, int h, double fill = 0.0);

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const ScalarGrid& o) const { return width == o.width && height == o.height; }
};

// Two-channel field (x and y components), one channel per ScalarGrid layout.
struct VectorGrid {
  int width = 0, height = 0;
  std::vector<double> x, y;

  VectorGrid() = default;
  VectorGrid(int w, int h, double fill = 0.0);

  std::size_t size() const { return x.size(); }
  bool same_shape(const VectorGrid& o) const { return width == o.width && height == o.height; }
};

// Displacement convention: the map sends grid point p to p + displacement(p).
struct DeformationField {
  VectorGrid displacement;

  DeformationField() = default;
  explicit DeformationField(VectorGrid d) : displacement(std::move(d)) {}
  DeformationField(int w, int h) : displacement(w, h, 0.0) {}
  int width() const { return displacement.width; }
  int height() const { return displacement.height; }
};

bool all_finite(const ScalarGrid& g);
bool all_finite(const VectorGrid& g);

// Bilinear interpolation with sample positions clamped to the grid rectangle.
double sample_bilinear(const ScalarGrid& img, double sx, double sy);

// out(p) = img(p + def(p)).
ScalarGrid warp(const ScalarGrid& img, const DeformationField& def);

// Exact adjoint of warp with respect to the image argument: scatters each
// residual value onto the four pixels its warped sample read from, with the
// same bilinear weights.  <warp(I,d), r> == <I, splat(r,d)> to roundoff.
ScalarGrid splat(const ScalarGrid& residual, const DeformationField& def);

// Per-pixel gradient of warp with respect to the sample position, contracted
// with a seed: out_c(p) = seed(p) * d sample(img, p+def(p)) / d position_c.
VectorGrid warp_position_gradient(const ScalarGrid& img, const DeformationField& def,
                                  const ScalarGrid& seed);

// Finite differences along one axis: central in the interior, one-sided at
// the two boundary lines.  Unit spacing.  adjoint_* is the exact transpose.
void diff_x(const double* f, double* out, int w, int h);
void diff_y(const double* f, double* out, int w, int h);
void diff_x_adjoint(const double* f, double* out, int w, int h);
void diff_y_adjoint(const double* f, double* out, int w, int h);

ScalarGrid gradient_x(const ScalarGrid& g);
ScalarGrid gradient_y(const ScalarGrid& g);

// det(I + Du) per pixel.
ScalarGrid jacobian_determinant(const DeformationField& def);

// out_c = sum_d (d u_c / d x_d) * v_d  (pointwise matrix-vector by Du).
VectorGrid jacobian_times(const VectorGrid& u, const VectorGrid& v);

// Pointwise transpose contraction: out_d = sum_c (d u_c / d x_d) * seed_c.
VectorGrid jacobian_transpose_times(const VectorGrid& u, const VectorGrid& seed);

// Adjoint of u |-> jacobian_times(u, v) at fixed v, applied to seed.
VectorGrid jacobian_times_adjoint_u(const VectorGrid& seed, const VectorGrid& v);

double dot(const ScalarGrid& a, const ScalarGrid& b);
double dot(const VectorGrid& a, const VectorGrid& b);
double max_abs_diff(const ScalarGrid& a, const ScalarGrid& b);
double max_abs_diff(const VectorGrid& a, const VectorGrid& b);
double sum_squared_diff(const ScalarGrid& a, const ScalarGrid& b);

}  // namespace geoshape
