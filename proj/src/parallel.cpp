#include "gradsurf/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#include <omp.h>

namespace gradsurf {

namespace {
int g_threads = 1;
}

void set_num_threads(int threads) {
  if (threads <= 0) threads = omp_get_num_procs();
  g_threads = threads;
  omp_set_num_threads(threads);
}

int num_threads() { return g_threads; }

int threads_from_env(int fallback) {
  const char* env = std::getenv("GRADSURF_THREADS");
  if (env == nullptr) return fallback;
  try {
    const int n = std::stoi(env);
    return n > 0 ? n : fallback;
  } catch (...) {
    return fallback;
  }
}

double deterministic_dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (std::int64_t blk = 0; blk < std::int64_t(blocks); ++blk) {
    const std::size_t begin = std::size_t(blk) * kReductionBlock;
    const std::size_t end = std::min(n, begin + kReductionBlock);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += a[i] * b[i];
    partial[std::size_t(blk)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double deterministic_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (std::int64_t blk = 0; blk < std::int64_t(blocks); ++blk) {
    const std::size_t begin = std::size_t(blk) * kReductionBlock;
    const std::size_t end = std::min(n, begin + kReductionBlock);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += values[i];
    partial[std::size_t(blk)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace gradsurf
