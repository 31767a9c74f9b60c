#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace zfbf {

/// Trials are cut into fixed-size chunks; workers claim chunks dynamically,
/// but each chunk's result lands in its own slot and is reduced in chunk
/// order, so the outcome does not depend on the worker count.
inline constexpr std::size_t kTrialChunk = 4096;

template <class ChunkFn>
void for_each_chunk(std::size_t n_items, std::size_t workers, ChunkFn&& fn,
                    std::size_t chunk = kTrialChunk) {
  const std::size_t n_chunks = (n_items + chunk - 1) / chunk;
  if (n_chunks == 0) return;
  workers = std::clamp<std::size_t>(workers, 1, n_chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        fn(c, c * chunk, std::min(n_items, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
        return;
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace zfbf
