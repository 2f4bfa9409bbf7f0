#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace geobridge {

inline int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size
/// chunks. Chunk boundaries depend only on n and chunk_size, never on the
/// worker count, so chunk-local randomness (streams keyed by chunk index)
/// and per-chunk partial reductions combined in chunk order give results
/// that are invariant to scheduling and thread count. Each chunk is
/// processed sequentially by exactly one worker.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int threads, Fn&& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  int n_workers = threads < 1 ? 1 : threads;
  if (n_workers == 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min<std::size_t>(n_chunks, static_cast<std::size_t>(n_workers));
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace geobridge
