#pragma once

// Minimal fork-join helper.  Work items must be independent; reductions are
// done by the caller in a fixed order so results are identical for any thread
// count.

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace cmm {

/// Run fn(i) for i in [0, n) on up to `threads` workers (1 = sequential).
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  int workers = std::max(1, threads);
  workers = static_cast<int>(std::min<std::size_t>(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace cmm
