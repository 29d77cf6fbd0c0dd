#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "cemflow/types.hpp"

namespace cemflow {

/// Runs fn(k) for k in [0, n) on up to `threads` workers. Each index is
/// processed exactly once; the first exception is rethrown on the caller.
template <class Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
  const int workers = int(std::min<Index>(std::max(threads, 1), std::max<Index>(n, 1)));
  if (workers <= 1) {
    for (Index k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (Index k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace cemflow
