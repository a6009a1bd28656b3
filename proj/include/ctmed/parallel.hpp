#pragma once

#include <cstddef>

namespace ctmed {

// Runs fn(i) for i in [0, n). workers <= 1 takes the plain serial loop,
// which is the reference path the parallel one is tested against. With
// more workers the iterations are spread over an OpenMP pool. The caller
// owns determinism: fn(i) must touch only state belonging to slot i and
// must not throw.
template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    fn(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace ctmed
