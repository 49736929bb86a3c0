#pragma once

#include <cstddef>
#include <span>

namespace gradsurf {

// Thread count used by every OpenMP kernel in the library. 1 selects the
// serial code path wherever a kernel has one.
void set_num_threads(int threads);
int num_threads();

// Thread count from GRADSURF_THREADS, or `fallback` if unset/invalid.
int threads_from_env(int fallback);

// Sum with a blocking that does not depend on the thread count, so the
// result is bit-identical for any number of threads.
double deterministic_sum(std::span<const double> values);
double deterministic_dot(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kReductionBlock = 4096;

}  // namespace gradsurf
