#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mpmcd {

/// Runs fn(begin, end, worker) over `threads` contiguous ranges of [0, n).
/// Range boundaries depend only on (n, threads). The first exception thrown
/// by any worker is rethrown on the caller.
template <typename Fn>
void parallel_ranges(std::size_t n, int threads, Fn&& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n < 2) {
    fn(std::size_t{0}, n, 0);
    return;
  }
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  pool.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    const std::size_t b = n * w / t;
    const std::size_t e = n * (w + 1) / t;
    pool.emplace_back([&, b, e, w] {
      try {
        fn(b, e, static_cast<int>(w));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace mpmcd
