#ifndef CARNOT_PARALLEL_HPP
#define CARNOT_PARALLEL_HPP

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace carnot {

// Thread count resolution order: explicit argument, CARNOT_POTENTIAL_THREADS,
// hardware concurrency. 0 means "not specified".
inline int resolve_threads(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CARNOT_POTENTIAL_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(i) for i in [0, n). Work is handed out in fixed chunks; anything
// order-sensitive must be written to per-index slots by the caller and
// reduced sequentially afterwards. Results are then independent of the
// thread count by construction.
template <class Fn>
void parallel_for(int64_t n, Fn&& fn, int threads = 0) {
  threads = resolve_threads(threads);
  if (n <= 0) return;
  if (threads <= 1 || n < 256) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int64_t chunk = (n + threads * 8 - 1) / (threads * 8);
  std::atomic<int64_t> next{0};
  auto worker = [&] {
    for (;;) {
      int64_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      int64_t end = begin + chunk < n ? begin + chunk : n;
      for (int64_t i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Deterministic parallel sum: per-index terms land in slots, reduction is
// sequential in index order regardless of scheduling.
template <class TermFn>
double parallel_sum(int64_t n, TermFn&& term, int threads = 0) {
  std::vector<double> slot(static_cast<size_t>(n));
  parallel_for(
      n, [&](int64_t i) { slot[static_cast<size_t>(i)] = term(i); }, threads);
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += slot[static_cast<size_t>(i)];
  return acc;
}

// Same contract for large n without per-index storage: indices are grouped
// into a fixed number of blocks (independent of the thread count), each block
// accumulates sequentially, and block partials reduce in block order.
template <class TermFn>
double parallel_block_sum(int64_t n, TermFn&& term, int threads = 0, int64_t blocks = 4096) {
  if (n <= 0) return 0.0;
  if (blocks > n) blocks = n;
  std::vector<double> partial(static_cast<size_t>(blocks), 0.0);
  parallel_for(
      blocks,
      [&](int64_t b) {
        const int64_t begin = b * n / blocks, end = (b + 1) * n / blocks;
        double acc = 0.0;
        for (int64_t i = begin; i < end; ++i) acc += term(i);
        partial[static_cast<size_t>(b)] = acc;
      },
      threads);
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

}  // namespace carnot

#endif
