#include "geoshape/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geoshape/fft.hpp"
#include "geoshape/image_io.hpp"

namespace geoshape {

using cd = std::complex<double>;

SpectralScalar::SpectralScalar(int tw_, int th_) : tw(tw_), th(th_) {
  if (tw <= 0 || th <= 0) throw ContractViolation("spectral extents must be positive");
  c.assign(static_cast<std::size_t>(tw) * th, cd(0.0, 0.0));
}

SobolevOperator::SobolevOperator(double alpha_, int power_, int full_w_, int full_h_)
    : alpha(alpha_), power(power_), full_w(full_w_), full_h(full_h_) {
  if (alpha <= 0.0) throw ContractViolation("sobolev operator: alpha must be positive");
  if (power < 1) throw ContractViolation("sobolev operator: power must be >= 1");
  if (full_w < 2 || full_h < 2) throw ContractViolation("sobolev operator: full grid too small");
}

double SobolevOperator::multiplier(int kx, int ky) const {
  double lap = (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * kx / full_w)) +
               (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * ky / full_h));
  double base = alpha * lap + 1.0;
  double m = 1.0;
  for (int p = 0; p < power; ++p) m *= base;
  return m;
}

SpectralScalar apply_sobolev(const SpectralScalar& s, const SobolevOperator& op, bool inverse) {
  SpectralScalar out(s.tw, s.th);
  for (int i = 0; i < s.th; ++i) {
    int ky = freq_of(i, s.th);
    for (int j = 0; j < s.tw; ++j) {
      double m = op.multiplier(freq_of(j, s.tw), ky);
      out.at(i, j) = inverse ? s.at(i, j) / m : s.at(i, j) * m;
    }
  }
  return out;
}

SpectralVelocity apply_sobolev(const SpectralVelocity& v, const SobolevOperator& op, bool inverse) {
  SpectralVelocity out;
  out.x = apply_sobolev(v.x, op, inverse);
  out.y = apply_sobolev(v.y, op, inverse);
  return out;
}

SpectralScalar apply_derivative(const SpectralScalar& s, int axis, const SobolevOperator& op) {
  SpectralScalar out(s.tw, s.th);
  int N = (axis == 0) ? op.full_w : op.full_h;
  for (int i = 0; i < s.th; ++i) {
    for (int j = 0; j < s.tw; ++j) {
      int k = (axis == 0) ? freq_of(j, s.tw) : freq_of(i, s.th);
      out.at(i, j) = s.at(i, j) * cd(0.0, std::sin(2.0 * std::numbers::pi * k / N));
    }
  }
  return out;
}

void hermitian_project(SpectralScalar& s) {
  SpectralScalar out(s.tw, s.th);
  for (int i = 0; i < s.th; ++i) {
    int ky = freq_of(i, s.th);
    for (int j = 0; j < s.tw; ++j) {
      int kx = freq_of(j, s.tw);
      if (!freq_paired(kx, ky, s.tw, s.th)) {
        out.at(i, j) = 0.0;
      } else {
        cd partner = s.at(slot_of(-ky, s.th), slot_of(-kx, s.tw));
        out.at(i, j) = 0.5 * (s.at(i, j) + std::conj(partner));
      }
    }
  }
  s = std::move(out);
}

void hermitian_project(SpectralVelocity& v) {
  hermitian_project(v.x);
  hermitian_project(v.y);
}

double hermitian_max_asymmetry(const SpectralScalar& s) {
  double m = 0.0;
  for (int i = 0; i < s.th; ++i) {
    int ky = freq_of(i, s.th);
    for (int j = 0; j < s.tw; ++j) {
      int kx = freq_of(j, s.tw);
      if (!freq_paired(kx, ky, s.tw, s.th)) {
        m = std::max(m, std::abs(s.at(i, j)));
      } else {
        cd partner = s.at(slot_of(-ky, s.th), slot_of(-kx, s.tw));
        m = std::max(m, std::abs(s.at(i, j) - std::conj(partner)));
      }
    }
  }
  return m;
}

std::vector<cd> pad_spectrum(const SpectralScalar& s, int W, int H) {
  if (W < s.tw || H < s.th) throw ContractViolation("pad_spectrum: target smaller than band");
  std::vector<cd> full(static_cast<std::size_t>(W) * H, cd(0.0, 0.0));
  for (int i = 0; i < s.th; ++i) {
    int ky = freq_of(i, s.th);
    int row = ((ky % H) + H) % H;
    for (int j = 0; j < s.tw; ++j) {
      int kx = freq_of(j, s.tw);
      int col = ((kx % W) + W) % W;
      full[static_cast<std::size_t>(row) * W + col] = s.at(i, j);
    }
  }
  return full;
}

SpectralScalar truncate_spectrum(const std::vector<cd>& full, int W, int H, int tw, int th) {
  if (static_cast<std::size_t>(W) * H != full.size())
    throw ContractViolation("truncate_spectrum: buffer size mismatch");
  SpectralScalar s(tw, th);
  for (int i = 0; i < th; ++i) {
    int ky = freq_of(i, th);
    int row = ((ky % H) + H) % H;
    for (int j = 0; j < tw; ++j) {
      int kx = freq_of(j, tw);
      int col = ((kx % W) + W) % W;
      s.at(i, j) = full[static_cast<std::size_t>(row) * W + col];
    }
  }
  return s;
}

namespace {

void spatial_channel(const SpectralScalar& s, int W, int H, std::vector<double>& out) {
  std::vector<cd> full = pad_spectrum(s, W, H);
  std::vector<cd> sp(full.size());
  ifft2(W, H, full.data(), sp.data());
  out.resize(full.size());
  for (std::size_t i = 0; i < sp.size(); ++i) out[i] = sp[i].real();
}

SpectralScalar analyze_channel(const std::vector<double>& g, int W, int H, int tw, int th,
                               double scale) {
  std::vector<cd> buf(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] = cd(g[i], 0.0);
  std::vector<cd> freq(g.size());
  fft2(W, H, buf.data(), freq.data());
  if (scale != 1.0)
    for (cd& v : freq) v *= scale;
  return truncate_spectrum(freq, W, H, tw, th);
}

}  // namespace

VectorGrid to_spatial(const SpectralVelocity& v, int W, int H) {
  VectorGrid g(W, H);
  spatial_channel(v.x, W, H, g.x);
  spatial_channel(v.y, W, H, g.y);
  return g;
}

SpectralVelocity from_spatial(const VectorGrid& g, int tw, int th) {
  double scale = 1.0 / (static_cast<double>(g.width) * g.height);
  SpectralVelocity v;
  v.x = analyze_channel(g.x, g.width, g.height, tw, th, scale);
  v.y = analyze_channel(g.y, g.width, g.height, tw, th, scale);
  hermitian_project(v);
  return v;
}

SpectralVelocity to_spatial_adjoint(const VectorGrid& seed, int tw, int th) {
  SpectralVelocity v;
  v.x = analyze_channel(seed.x, seed.width, seed.height, tw, th, 1.0);
  v.y = analyze_channel(seed.y, seed.width, seed.height, tw, th, 1.0);
  return v;
}

int good_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

namespace {

struct PadPlan {
  int pw, ph;
  double inv_area;
};

PadPlan pad_plan(int tw, int th) {
  PadPlan p;
  p.pw = good_fft_size(2 * tw - 1);
  p.ph = good_fft_size(2 * th - 1);
  p.inv_area = 1.0 / (static_cast<double>(p.pw) * p.ph);
  return p;
}

std::vector<cd> pad_ifft(const SpectralScalar& s, const PadPlan& p) {
  std::vector<cd> full = pad_spectrum(s, p.pw, p.ph);
  std::vector<cd> sp(full.size());
  ifft2(p.pw, p.ph, full.data(), sp.data());
  return sp;
}

SpectralScalar fft_truncate(const std::vector<cd>& sp, const PadPlan& p, int tw, int th) {
  std::vector<cd> freq(sp.size());
  fft2(p.pw, p.ph, sp.data(), freq.data());
  for (cd& v : freq) v *= p.inv_area;
  return truncate_spectrum(freq, p.pw, p.ph, tw, th);
}

}  // namespace

SpectralScalar spectral_product(const SpectralScalar& a, const SpectralScalar& b,
                                ProductKind kind) {
  if (a.tw != b.tw || a.th != b.th) throw ContractViolation("spectral_product: band mismatch");
  PadPlan p = pad_plan(a.tw, a.th);
  std::vector<cd> A = pad_ifft(a, p);
  std::vector<cd> B = pad_ifft(b, p);
  for (std::size_t i = 0; i < A.size(); ++i)
    A[i] = (kind == ProductKind::Correlation ? std::conj(A[i]) : A[i]) * B[i];
  return fft_truncate(A, p, a.tw, a.th);
}

SpectralVelocity epdiff_rhs(const SpectralVelocity& v, const SobolevOperator& op) {
  const int tw = v.tw(), th = v.th();
  PadPlan p = pad_plan(tw, th);

  const SpectralScalar* vc[2] = {&v.x, &v.y};
  SpectralScalar m[2] = {apply_sobolev(v.x, op, false), apply_sobolev(v.y, op, false)};

  std::vector<cd> V[2], M[2], J[2][2];
  for (int d = 0; d < 2; ++d) {
    V[d] = pad_ifft(*vc[d], p);
    M[d] = pad_ifft(m[d], p);
    for (int c = 0; c < 2; ++c) J[c][d] = pad_ifft(apply_derivative(*vc[d], c, op), p);
  }

  SpectralVelocity rhs(tw, th);
  std::vector<cd> acc(V[0].size());
  for (int c = 0; c < 2; ++c) {
    // term1_c = sum_d (D_c v_d) correlated with (L v_d)
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] = std::conj(J[c][0][i]) * M[0][i] + std::conj(J[c][1][i]) * M[1][i];
    SpectralScalar t = fft_truncate(acc, p, tw, th);
    // term2_c = sum_d D_d ((L v_c) convolved with v_d)
    for (int d = 0; d < 2; ++d) {
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = M[c][i] * V[d][i];
      SpectralScalar t2 = apply_derivative(fft_truncate(acc, p, tw, th), d, op);
      for (std::size_t i = 0; i < t.c.size(); ++i) t.c[i] += t2.c[i];
    }
    SpectralScalar r = apply_sobolev(t, op, true);
    for (std::size_t i = 0; i < r.c.size(); ++i) r.c[i] = -r.c[i];
    (c == 0 ? rhs.x : rhs.y) = std::move(r);
  }
  hermitian_project(rhs);
  return rhs;
}

SpectralVelocity epdiff_rhs_adjoint(const SpectralVelocity& v, const SpectralVelocity& seed,
                                    const SobolevOperator& op) {
  const int tw = v.tw(), th = v.th();
  PadPlan p = pad_plan(tw, th);

  // Mirror of the forward chain: seed passes through the projection, then
  // the (real) -K multiplier, then the adjoint of each product term.
  SpectralVelocity sproj = seed;
  hermitian_project(sproj);
  SpectralScalar sig[2];
  for (int c = 0; c < 2; ++c) {
    sig[c] = apply_sobolev(c == 0 ? sproj.x : sproj.y, op, true);
    for (cd& z : sig[c].c) z = -z;
  }

  const SpectralScalar* vc[2] = {&v.x, &v.y};
  SpectralScalar m[2] = {apply_sobolev(v.x, op, false), apply_sobolev(v.y, op, false)};

  std::vector<cd> V[2], B[2], S[2], J[2][2], W[2][2];
  for (int d = 0; d < 2; ++d) {
    V[d] = pad_ifft(*vc[d], p);
    B[d] = pad_ifft(m[d], p);
    S[d] = pad_ifft(sig[d], p);
    for (int c = 0; c < 2; ++c) J[c][d] = pad_ifft(apply_derivative(*vc[d], c, op), p);
  }
  for (int c = 0; c < 2; ++c)
    for (int d = 0; d < 2; ++d) {
      SpectralScalar chi = apply_derivative(sig[c], d, op);
      for (cd& z : chi.c) z = -z;
      W[c][d] = pad_ifft(chi, p);
    }

  SpectralVelocity out(tw, th);
  std::vector<cd> acc(V[0].size());
  for (int d = 0; d < 2; ++d) {
    SpectralScalar g(tw, th);
    // derivative slot of term1: -sum_c D_c corr(sigma_c, L v_d)
    for (int c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = std::conj(S[c][i]) * B[d][i];
      SpectralScalar t = apply_derivative(fft_truncate(acc, p, tw, th), c, op);
      for (std::size_t i = 0; i < g.c.size(); ++i) g.c[i] -= t.c[i];
    }
    // momentum slot of term1: L sum_c conv(D_c v_d, sigma_c)
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] = J[0][d][i] * S[0][i] + J[1][d][i] * S[1][i];
    SpectralScalar t = apply_sobolev(fft_truncate(acc, p, tw, th), op, false);
    for (std::size_t i = 0; i < g.c.size(); ++i) g.c[i] += t.c[i];
    // velocity slot of term2: sum_c corr(L v_c, chi_cd)
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] = std::conj(B[0][i]) * W[0][d][i] + std::conj(B[1][i]) * W[1][d][i];
    t = fft_truncate(acc, p, tw, th);
    for (std::size_t i = 0; i < g.c.size(); ++i) g.c[i] += t.c[i];
    // momentum slot of term2: L sum_e corr(v_e, chi_de)
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] = std::conj(V[0][i]) * W[d][0][i] + std::conj(V[1][i]) * W[d][1][i];
    t = apply_sobolev(fft_truncate(acc, p, tw, th), op, false);
    for (std::size_t i = 0; i < g.c.size(); ++i) g.c[i] += t.c[i];
    (d == 0 ? out.x : out.y) = std::move(g);
  }
  return out;
}

double dot(const SpectralVelocity& a, const SpectralVelocity& b) {
  if (a.tw() != b.tw() || a.th() != b.th()) throw ContractViolation("dot: band mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.x.c.size(); ++i) {
    acc += a.x.c[i].real() * b.x.c[i].real() + a.x.c[i].imag() * b.x.c[i].imag();
    acc += a.y.c[i].real() * b.y.c[i].real() + a.y.c[i].imag() * b.y.c[i].imag();
  }
  return acc;
}

double kinetic_energy(const SpectralVelocity& v, const SobolevOperator& op) {
  double acc = 0.0;
  for (int comp = 0; comp < 2; ++comp) {
    const SpectralScalar& s = (comp == 0) ? v.x : v.y;
    for (int i = 0; i < s.th; ++i) {
      int ky = freq_of(i, s.th);
      for (int j = 0; j < s.tw; ++j) {
        double m = op.multiplier(freq_of(j, s.tw), ky);
        acc += m * std::norm(s.at(i, j));
      }
    }
  }
  return acc;
}

SpectralVelocity& axpy(SpectralVelocity& y, double a, const SpectralVelocity& x) {
  if (y.tw() != x.tw() || y.th() != x.th()) throw ContractViolation("axpy: band mismatch");
  for (std::size_t i = 0; i < y.x.c.size(); ++i) {
    y.x.c[i] += a * x.x.c[i];
    y.y.c[i] += a * x.y.c[i];
  }
  return y;
}

SpectralVelocity scaled(const SpectralVelocity& v, double a) {
  SpectralVelocity out = v;
  for (std::size_t i = 0; i < out.x.c.size(); ++i) {
    out.x.c[i] *= a;
    out.y.c[i] *= a;
  }
  return out;
}

double max_abs(const SpectralVelocity& v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.x.c.size(); ++i) {
    m = std::max(m, std::abs(v.x.c[i]));
    m = std::max(m, std::abs(v.y.c[i]));
  }
  return m;
}

double max_abs_diff(const SpectralVelocity& a, const SpectralVelocity& b) {
  if (a.tw() != b.tw() || a.th() != b.th()) throw ContractViolation("max_abs_diff: band mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.x.c.size(); ++i) {
    m = std::max(m, std::abs(a.x.c[i] - b.x.c[i]));
    m = std::max(m, std::abs(a.y.c[i] - b.y.c[i]));
  }
  return m;
}

bool all_finite(const SpectralVelocity& v) {
  for (std::size_t i = 0; i < v.x.c.size(); ++i) {
    if (!std::isfinite(v.x.c[i].real()) || !std::isfinite(v.x.c[i].imag())) return false;
    if (!std::isfinite(v.y.c[i].real()) || !std::isfinite(v.y.c[i].imag())) return false;
  }
  return true;
}

void write_velocity(const SpectralVelocity& v, const std::string& path) {
  const int tw = v.tw(), th = v.th();
  std::vector<float> vals;
  vals.reserve(static_cast<std::size_t>(4) * tw * th);
  for (int comp = 0; comp < 2; ++comp) {
    const SpectralScalar& s = (comp == 0) ? v.x : v.y;
    for (int reim = 0; reim < 2; ++reim)
      for (const cd& z : s.c)
        vals.push_back(static_cast<float>(reim == 0 ? z.real() : z.imag()));
  }
  write_gsf(path, {2, 2, static_cast<std::uint32_t>(th), static_cast<std::uint32_t>(tw)}, vals);
}

SpectralVelocity read_velocity(const std::string& path) {
  GsfData g = read_gsf(path);
  if (g.dims.size() != 4 || g.dims[0] != 2 || g.dims[1] != 2)
    throw FormatError(path, 4, "expected rank-4 {2,2,th,tw} velocity tensor");
  int th = static_cast<int>(g.dims[2]), tw = static_cast<int>(g.dims[3]);
  SpectralVelocity v(tw, th);
  std::size_t plane = static_cast<std::size_t>(tw) * th;
  for (int comp = 0; comp < 2; ++comp) {
    SpectralScalar& s = (comp == 0) ? v.x : v.y;
    std::size_t base = static_cast<std::size_t>(comp) * 2 * plane;
    for (std::size_t i = 0; i < plane; ++i)
      s.c[i] = cd(g.values[base + i], g.values[base + plane + i]);
  }
  return v;
}

}  // namespace geoshape
