#pragma once
#include <complex>

namespace geoshape {

// Unnormalized 2-d complex DFTs on row-major buffers (h rows of w).
//   fft2:  out(k) = sum_x in(x) exp(-2*pi*i k.x / N)   (analysis direction)
//   ifft2: out(x) = sum_k in(k) exp(+2*pi*i k.x / N)   (synthesis direction)
// Neither applies a 1/N factor; callers own the normalization.  Plans are
// cached per (w, h, direction) and execution is thread-safe.
void fft2(int w, int h, const std::complex<double>* in, std::complex<double>* out);
void ifft2(int w, int h, const std::complex<double>* in, std::complex<double>* out);

}  // namespace geoshape
