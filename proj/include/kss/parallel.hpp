#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kss {

inline int default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs body(i) for i in [0, n). Work is split into contiguous blocks and each
// index writes only its own output slot, so results do not depend on the
// thread count. The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(long n, int threads, Body&& body) {
  if (n <= 0) return;
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<long>(n, 1 << 16))));
  if (threads == 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    const long lo = n * t / threads, hi = n * (t + 1) / threads;
    pool.emplace_back([&, lo, hi] {
      try {
        for (long i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace kss
