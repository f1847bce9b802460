#pragma once

#include <cstddef>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mkv {

// Runs fn(i) for i in [0, count) on up to `threads` workers with a static
// schedule. The exception from the lowest failing index is rethrown, so error
// reporting does not depend on scheduling either.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::exception_ptr first_error;
  std::size_t first_index = std::numeric_limits<std::size_t>::max();
  const long long n = static_cast<long long>(count);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : 1)
#endif
  for (long long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(mkv_parallel_for_error)
#endif
      {
        if (static_cast<std::size_t>(i) < first_index) {
          first_index = static_cast<std::size_t>(i);
          first_error = std::current_exception();
        }
      }
    }
  }
  (void)threads;
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mkv
