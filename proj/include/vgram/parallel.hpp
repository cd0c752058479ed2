#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace vgram::detail {

inline unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// The chunk grid depends only on the item count, never on the worker count,
// so per-chunk partial results reduced in chunk order give the same answer
// for any --threads value.
constexpr std::size_t kMaxChunks = 32;

inline std::size_t chunk_count(std::size_t n_items) {
  return std::clamp<std::size_t>(n_items, 1, kMaxChunks);
}

inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n_items,
                                                       std::size_t chunks,
                                                       std::size_t c) {
  const std::size_t base = n_items / chunks;
  const std::size_t rem = n_items % chunks;
  const std::size_t begin = c * base + std::min(c, rem);
  return {begin, begin + base + (c < rem ? 1 : 0)};
}

// Runs fn(chunk_index, begin, end) over a fixed chunk grid, possibly on
// several threads. fn must only write to chunk-owned storage.
template <typename Fn>
void for_chunks(std::size_t n_items, int threads, Fn&& fn) {
  const std::size_t chunks = chunk_count(n_items);
  const unsigned workers =
      std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      const auto [b, e] = chunk_range(n_items, chunks, c);
      fn(c, b, e);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        const auto [b, e] = chunk_range(n_items, chunks, c);
        fn(c, b, e);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace vgram::detail
