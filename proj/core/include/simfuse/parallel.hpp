#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace simfuse {

/// Runs fn(worker, index) for index in [0, count) on up to `workers` threads.
/// Work is handed out dynamically, so callers must write results by index.
/// The first exception thrown by any task is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (count == 0) {
    return;
  }
  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(0u, i);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&](unsigned worker) {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) {
        return;
      }
      try {
        fn(worker, i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) {
          error = std::current_exception();
        }
        next.store(count, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(n_threads - 1);
  for (unsigned w = 1; w < n_threads; ++w) {
    pool.emplace_back(body, w);
  }
  body(0);
  pool.clear();
  if (error) {
    std::rethrow_exception(error);
  }
}

/// Worker count used when the caller passes 0.
inline unsigned default_workers() noexcept {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

}  // namespace simfuse
