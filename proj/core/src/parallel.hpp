// SPDX-License-Identifier: Apache-2.0
// Internal helper: index-space parallel for with stable output slots.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace toolvoc::detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is handed out
// by an atomic counter, so callers must write results into per-index slots
// to stay deterministic; the order of execution is not.
template <typename Fn>
void parallel_for(size_t n, size_t threads, Fn&& fn) {
  if (n == 0) return;
  threads = std::max<size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace toolvoc::detail
