// Times the OpenMP grid kernels against their serial reference
// implementations and reports speedups, verifying bitwise agreement on the
// way.  Usage: kernel_bench [size] [reps]
#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "geoshape/grid.hpp"
#include "geoshape/reference.hpp"
#include "geoshape/rng.hpp"

using namespace geoshape;

namespace {

ScalarGrid random_image(int w, int h, std::uint64_t salt) {
  std::mt19937_64 eng = make_engine(4242, rng_stream::kTest, salt);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  ScalarGrid g(w, h);
  for (auto& v : g.data) v = uni(eng);
  return g;
}

VectorGrid random_field(int w, int h, std::uint64_t salt, double amplitude) {
  std::mt19937_64 eng = make_engine(4242, rng_stream::kTest, salt);
  std::uniform_real_distribution<double> uni(-amplitude, amplitude);
  VectorGrid g(w, h);
  for (auto& v : g.x) v = uni(eng);
  for (auto& v : g.y) v = uni(eng);
  return g;
}

struct Row {
  const char* name;
  double serial_s, parallel_s;
  bool match;
};

template <typename Serial, typename Parallel, typename Result>
Row time_pair(const char* name, int reps, Serial&& serial, Parallel&& parallel,
              Result&& differ) {
  // One warm round outside the clock settles allocation and thread startup.
  auto a = serial();
  auto b = parallel();

  double t0 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) a = serial();
  double t1 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) b = parallel();
  double t2 = omp_get_wtime();
  return {name, (t1 - t0) / reps, (t2 - t1) / reps, differ(a, b) == 0.0};
}

}  // namespace

int main(int argc, char** argv) {
  int size = argc > 1 ? std::atoi(argv[1]) : 512;
  int reps = argc > 2 ? std::atoi(argv[2]) : 20;
  if (size < 8 || reps < 1) {
    std::fprintf(stderr, "usage: kernel_bench [size >= 8] [reps >= 1]\n");
    return 2;
  }

  ScalarGrid img = random_image(size, size, 1);
  ScalarGrid seed = random_image(size, size, 2);
  DeformationField def(random_field(size, size, 3, 2.5));
  VectorGrid u = random_field(size, size, 4, 1.0);
  VectorGrid v = random_field(size, size, 5, 1.0);

  std::printf("grid %dx%d, %d reps, %d threads\n\n", size, size, reps, omp_get_max_threads());
  std::printf("%-28s %12s %12s %9s  %s\n", "kernel", "serial (ms)", "openmp (ms)", "speedup",
              "bitwise");

  Row rows[] = {
      time_pair(
          "warp", reps, [&] { return reference::warp(img, def); },
          [&] { return warp(img, def); },
          [](const ScalarGrid& a, const ScalarGrid& b) { return max_abs_diff(a, b); }),
      time_pair(
          "warp_position_gradient", reps,
          [&] { return reference::warp_position_gradient(img, def, seed); },
          [&] { return warp_position_gradient(img, def, seed); },
          [](const VectorGrid& a, const VectorGrid& b) { return max_abs_diff(a, b); }),
      time_pair(
          "gradient_x", reps,
          [&] {
            ScalarGrid out(img.width, img.height);
            reference::diff_x(img.data.data(), out.data.data(), img.width, img.height);
            return out;
          },
          [&] { return gradient_x(img); },
          [](const ScalarGrid& a, const ScalarGrid& b) { return max_abs_diff(a, b); }),
      time_pair(
          "jacobian_determinant", reps, [&] { return reference::jacobian_determinant(def); },
          [&] { return jacobian_determinant(def); },
          [](const ScalarGrid& a, const ScalarGrid& b) { return max_abs_diff(a, b); }),
      time_pair(
          "jacobian_times", reps, [&] { return reference::jacobian_times(u, v); },
          [&] { return jacobian_times(u, v); },
          [](const VectorGrid& a, const VectorGrid& b) { return max_abs_diff(a, b); }),
      time_pair(
          "jacobian_transpose_times", reps,
          [&] { return reference::jacobian_transpose_times(u, v); },
          [&] { return jacobian_transpose_times(u, v); },
          [](const VectorGrid& a, const VectorGrid& b) { return max_abs_diff(a, b); }),
  };

  bool all_match = true;
  for (const Row& r : rows) {
    std::printf("%-28s %12.3f %12.3f %8.2fx  %s\n", r.name, r.serial_s * 1e3,
                r.parallel_s * 1e3, r.serial_s / r.parallel_s, r.match ? "yes" : "NO");
    all_match = all_match && r.match;
  }
  if (!all_match) {
    std::fprintf(stderr, "\nmismatch between serial and parallel kernels\n");
    return 1;
  }
  return 0;
}
