#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace dsca {

// Evaluation parallelism cap: DSCA_THREADS when set, hardware concurrency
// otherwise, never below one.
inline int eval_threads() {
  if (const char* env = std::getenv("DSCA_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Index-parallel loop with disjoint writes: each worker owns a contiguous
// chunk, so results land in caller-provided slots and reductions stay
// ordered and deterministic regardless of the thread count.
inline void parallel_for(size_t count, const std::function<void(size_t)>& body) {
  int threads = eval_threads();
  if (threads <= 1 || count < 2) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  size_t n_workers = std::min<size_t>(threads, count);
  std::vector<std::thread> workers;
  size_t chunk = (count + n_workers - 1) / n_workers;
  for (size_t w = 0; w < n_workers; ++w) {
    size_t lo = w * chunk;
    size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([lo, hi, &body]() {
      for (size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (std::thread& t : workers) t.join();
}

} // namespace dsca
