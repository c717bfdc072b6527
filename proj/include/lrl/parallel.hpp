#pragma once

// Minimal deterministic parallel-for.  Work is split into fixed chunks that
// depend only on the problem size, never on the thread count, so per-chunk
// partial results can be combined in index order and every reduction is
// bit-reproducible.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lrl {

inline int& thread_count() {
  static int n = int(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

inline void set_thread_count(int n) { thread_count() = std::max(1, n); }

// fn(chunk_index, begin, end).  Chunk boundaries are a pure function of n.
inline void parallel_chunks(std::size_t n,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                            std::size_t min_grain = 1024) {
  if (n == 0) return;
  std::size_t nchunks = std::max<std::size_t>(1, std::min<std::size_t>(64, n / min_grain));
  const std::size_t chunk = (n + nchunks - 1) / nchunks;
  nchunks = (n + chunk - 1) / chunk;

  const int nt = thread_count();
  if (nt <= 1 || nchunks == 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::vector<std::thread> pool;
  std::size_t next = 0;
  std::mutex mtx;
  auto worker = [&] {
    for (;;) {
      std::size_t c;
      {
        std::lock_guard<std::mutex> lk(mtx);
        if (next >= nchunks) return;
        c = next++;
      }
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  const int spawn = int(std::min<std::size_t>(nt, nchunks));
  pool.reserve(spawn);
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         std::size_t min_grain = 1024) {
  parallel_chunks(n, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) body(i);
  }, min_grain);
}

// Deterministic parallel reduction: per-chunk sums combined in chunk order.
inline double parallel_reduce(std::size_t n, const std::function<double(std::size_t)>& term,
                              std::size_t min_grain = 4096) {
  if (n == 0) return 0.0;
  std::size_t nchunks = std::max<std::size_t>(1, std::min<std::size_t>(64, n / min_grain));
  const std::size_t chunk = (n + nchunks - 1) / nchunks;
  nchunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(nchunks, 0.0);
  parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
    double s = 0;
    for (std::size_t i = b; i < e; ++i) s += term(i);
    partial[c] = s;
  }, min_grain);
  double s = 0;
  for (double p : partial) s += p;
  return s;
}

}  // namespace lrl
