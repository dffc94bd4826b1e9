#include "geoshape/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace geoshape {

namespace {

std::mutex plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan>& plan_cache() {
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  return cache;
}

fftw_plan plan_for(int w, int h, int sign) {
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto key = std::make_tuple(w, h, sign);
  auto it = plan_cache().find(key);
  if (it != plan_cache().end()) return it->second;
  std::vector<fftw_complex> scratch_in(static_cast<std::size_t>(w) * h);
  std::vector<fftw_complex> scratch_out(scratch_in.size());
  // FFTW_ESTIMATE keeps planning deterministic; FFTW_UNALIGNED lets the plan
  // run on any caller buffer via fftw_execute_dft.
  fftw_plan p = fftw_plan_dft_2d(h, w, scratch_in.data(), scratch_out.data(), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_cache().emplace(key, p);
  return p;
}

void run(int w, int h, int sign, const std::complex<double>* in, std::complex<double>* out) {
  fftw_plan p = plan_for(w, h, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace

void fft2(int w, int h, const std::complex<double>* in, std::complex<double>* out) {
  run(w, h, FFTW_FORWARD, in, out);
}

void ifft2(int w, int h, const std::complex<double>* in, std::complex<double>* out) {
  run(w, h, FFTW_BACKWARD, in, out);
}

}  // namespace geoshape
