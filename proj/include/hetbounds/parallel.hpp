#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace hb::util {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Chunked parallel map over [0, count); results must be written to
// pre-sized, index-disjoint slots so scheduling never changes output.
inline void parallel_for(std::int64_t count, int threads,
                         const std::function<void(std::int64_t)>& body) {
  threads = std::min<std::int64_t>(resolve_threads(threads), std::max<std::int64_t>(count, 1));
  if (threads <= 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  std::int64_t chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    std::int64_t lo = t * chunk;
    std::int64_t hi = std::min<std::int64_t>(lo + chunk, count);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::int64_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace hb::util
