#pragma once
#include <complex>
#include <string>
#include <vector>

#include "geoshape/grid.hpp"

namespace geoshape {

// Bandlimited scalar field stored as a centered block of Fourier
// coefficients.  Slot (i, j) of the row-major block holds frequency
// (kx, ky) = (j - tw/2, i - th/2); for even extents the most negative
// frequency line has no positive partner and is kept at zero by
// hermitian_project so real-valuedness is representable.
struct SpectralScalar {
  int tw = 0, th = 0;
  std::vector<std::complex<double>> c;

  SpectralScalar() = default;
  SpectralScalar(int tw_, int th_);

  std::complex<double>& at(int i, int j) { return c[static_cast<std::size_t>(i) * tw + j]; }
  std::complex<double> at(int i, int j) const { return c[static_cast<std::size_t>(i) * tw + j]; }
};

inline int freq_of(int slot, int extent) { return slot - extent / 2; }
inline int slot_of(int freq, int extent) { return freq + extent / 2; }
inline bool freq_in_band(int freq, int extent) {
  return freq >= -(extent / 2) && freq <= (extent - 1) / 2;
}
// True when (-kx, -ky) also lies in the band.
inline bool freq_paired(int kx, int ky, int tw, int th) {
  return freq_in_band(-kx, tw) && freq_in_band(-ky, th);
}

// Two-component bandlimited field (velocity or momentum coefficients).
struct SpectralVelocity {
  SpectralScalar x, y;

  SpectralVelocity() = default;
  SpectralVelocity(int tw, int th) : x(tw, th), y(tw, th) {}
  int tw() const { return x.tw; }
  int th() const { return x.th; }
};
using SpectralMomentum = SpectralVelocity;

// Multiplier form of L = (-alpha * Laplacian + Id)^power built from the
// discrete 5-point Laplacian of the full grid, and its inverse K.  The
// multiplier is >= 1 everywhere and equals 1 at the zero frequency.
struct SobolevOperator {
  double alpha = 3.0;
  int power = 3;
  int full_w = 0, full_h = 0;

  SobolevOperator(double alpha_, int power_, int full_w_, int full_h_);
  double multiplier(int kx, int ky) const;
};

SpectralScalar apply_sobolev(const SpectralScalar& s, const SobolevOperator& op, bool inverse);
SpectralVelocity apply_sobolev(const SpectralVelocity& v, const SobolevOperator& op, bool inverse);

// Spectral central-difference derivative along one axis: multiply by
// i*sin(2*pi*k/N) with N the full grid extent on that axis.
SpectralScalar apply_derivative(const SpectralScalar& s, int axis, const SobolevOperator& op);

void hermitian_project(SpectralScalar& s);
void hermitian_project(SpectralVelocity& v);
double hermitian_max_asymmetry(const SpectralScalar& s);

std::vector<std::complex<double>> pad_spectrum(const SpectralScalar& s, int W, int H);
SpectralScalar truncate_spectrum(const std::vector<std::complex<double>>& full, int W, int H,
                                 int tw, int th);

// Synthesis: real part of the unnormalized inverse DFT of the zero-padded
// spectrum.  With from_spatial defined as forward DFT scaled by 1/(W*H), the
// pair is an exact identity on bandlimited fields; that round-trip fixes
// every scale constant in this module.
VectorGrid to_spatial(const SpectralVelocity& v, int W, int H);
SpectralVelocity from_spatial(const VectorGrid& g, int tw, int th);
// Exact adjoint of to_spatial: truncated unnormalized forward DFT.
SpectralVelocity to_spatial_adjoint(const VectorGrid& seed, int tw, int th);

enum class ProductKind { Convolution, Correlation };

// Truncated product of bandlimited spectra, evaluated by pointwise
// multiplication on a grid zero-padded to at least 2*extent-1 per axis
// (rounded up to a 5-smooth FFT size) so no aliased lattice site can land
// back inside the band.  Correlation conjugates the first argument.
SpectralScalar spectral_product(const SpectralScalar& a, const SpectralScalar& b, ProductKind kind);

// Fluid-momentum conservation right-hand side in the bandlimited space:
//   rhs_c = -K [ sum_d (D_c v_d) (corr) (L v_d)  +  sum_d D_d ((L v_c) (conv) v_d) ]
// followed by Hermitian projection.  Shares spatial transforms across the
// terms; equivalent to composing spectral_product calls.
SpectralVelocity epdiff_rhs(const SpectralVelocity& v, const SobolevOperator& op);

// Exact adjoint of epdiff_rhs at v, applied to seed:
// returns (d rhs / d v)^T seed for the discrete operator above.
SpectralVelocity epdiff_rhs_adjoint(const SpectralVelocity& v, const SpectralVelocity& seed,
                                    const SobolevOperator& op);

// Plain real inner product over retained coefficients (both components).
double dot(const SpectralVelocity& a, const SpectralVelocity& b);
// (L v, v): the metric norm used as the regularization term.
double kinetic_energy(const SpectralVelocity& v, const SobolevOperator& op);

SpectralVelocity& axpy(SpectralVelocity& y, double a, const SpectralVelocity& x);
SpectralVelocity scaled(const SpectralVelocity& v, double a);
double max_abs(const SpectralVelocity& v);
double max_abs_diff(const SpectralVelocity& a, const SpectralVelocity& b);
bool all_finite(const SpectralVelocity& v);

// Smallest 5-smooth integer >= n.
int good_fft_size(int n);

// GSF1 persistence: rank-4 tensor {component, re/im, th, tw}.
void write_velocity(const SpectralVelocity& v, const std::string& path);
SpectralVelocity read_velocity(const std::string& path);

}  // namespace geoshape
