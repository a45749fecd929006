#pragma once

#include <cstddef>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace lebspec {

// Thread count for sweep parallelization, from LEBSPEC_THREADS (default 1).
inline unsigned configured_threads() {
  if (const char* env = std::getenv("LEBSPEC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 256) return static_cast<unsigned>(v);
  }
  return 1;
}

// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n).
// Chunk boundaries do not depend on the thread count; callers combine
// per-chunk results in chunk order, so outputs are identical for any
// LEBSPEC_THREADS setting.
inline void for_chunks(std::size_t n, std::size_t chunk_size, unsigned threads,
                       const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  if (threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
    return;
  }
  std::vector<std::thread> pool;
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(threads, n_chunks));
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([=, &fn] {
      for (std::size_t c = w; c < n_chunks; c += workers) {
        fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace lebspec
