#pragma once

// Batch-parallel loop used by the scoring stage. Results are written per index,
// so output does not depend on the worker count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace adaptau {

/// 0 means one worker per hardware thread.
inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for every i in [0, n) over contiguous batches of at least
/// `min_batch` indices. The first exception from any batch is rethrown after
/// all workers have joined.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t workers = 0, std::size_t min_batch = 1024) {
  std::size_t w = resolve_workers(workers);
  w = std::min(w, std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_batch)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + w - 1) / w;
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t end = std::min(n, (t + 1) * chunk);
        for (std::size_t i = t * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace adaptau
