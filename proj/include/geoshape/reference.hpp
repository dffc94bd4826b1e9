#pragma once
#include "geoshape/grid.hpp"

// Serial reference implementations of the parallelized grid kernels.  Each
// computes the same per-element expressions as its counterpart in grid.cpp,
// so results must match bitwise for any thread count; the test suite and the
// benchmark tool hold the two sides together.
namespace geoshape::reference {

ScalarGrid warp(const ScalarGrid& img, const DeformationField& def);
VectorGrid warp_position_gradient(const ScalarGrid& img, const DeformationField& def,
                                  const ScalarGrid& seed);
void diff_x(const double* f, double* out, int w, int h);
void diff_y(const double* f, double* out, int w, int h);
ScalarGrid jacobian_determinant(const DeformationField& def);
VectorGrid jacobian_times(const VectorGrid& u, const VectorGrid& v);
VectorGrid jacobian_transpose_times(const VectorGrid& u, const VectorGrid& seed);

}  // namespace geoshape::reference
