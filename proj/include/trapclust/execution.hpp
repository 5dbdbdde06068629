#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace trapclust {

// Every kernel with independent work items (restarts, per-class solves, sweep
// grid points, walker start nodes) has an OpenMP path and a plain loop. Both
// produce identical results: randomness is drawn from per-item streams, never
// from a shared generator.
enum class Execution { kParallel, kSerial };

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent generator for work item `stream` under a user seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ splitmix64(stream + 1)),
                    splitmix64(stream)};
  return Rng(seq);
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_max_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Runs fn(i) for i in [0, count). The first exception thrown by any item is
// rethrown on the calling thread after the loop.
template <typename Fn>
void for_each_index(std::int64_t count, Execution exec, Fn&& fn) {
  if (exec == Execution::kSerial || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace trapclust
