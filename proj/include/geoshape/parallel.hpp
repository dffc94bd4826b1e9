#pragma once
#include <exception>

namespace geoshape {

// An exception crossing an OpenMP region boundary terminates the process, so
// worker loops whose bodies can throw run through this wrapper.  The
// exception from the lowest loop index wins, keeping failures deterministic
// under any thread schedule.
template <typename Body>
void parallel_for_each(long n, Body&& body) {
  std::exception_ptr err;
  long err_index = n;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(geoshape_parallel_for_each)
      if (i < err_index) {
        err_index = i;
        err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace geoshape
