#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ganaug {

// Worker cap. GANAUG_THREADS=0 or 1 selects serial execution; unset defaults
// to the hardware count. parallel_for only splits loops whose iterations are
// independent and internally fixed-order, so results are bit-identical to a
// serial run for any thread count.
inline int& thread_count_ref() {
  static int count = [] {
    const char* env = std::getenv("GANAUG_THREADS");
    if (env != nullptr) {
      long v = std::strtol(env, nullptr, 10);
      if (v <= 1) return 1;
      return static_cast<int>(v > 64 ? 64 : v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw > 16 ? 16 : hw);
  }();
  return count;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = n < 1 ? 1 : n; }

namespace detail {

inline bool& in_parallel_region() {
  thread_local bool flag = false;
  return flag;
}

}  // namespace detail

// Runs fn(i) for i in [begin, end). Contiguous static partition; nested calls
// run inline so a worker never re-enters the pool.
inline void parallel_for(std::int64_t begin, std::int64_t end,
                         const std::function<void(std::int64_t)>& fn) {
  std::int64_t n = end - begin;
  if (n <= 0) return;
  int workers = thread_count();
  if (workers <= 1 || n == 1 || detail::in_parallel_region()) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  if (workers > n) workers = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  std::int64_t chunk = (n + workers - 1) / workers;
  auto run_range = [&fn](std::int64_t lo, std::int64_t hi) {
    detail::in_parallel_region() = true;
    for (std::int64_t i = lo; i < hi; ++i) fn(i);
    detail::in_parallel_region() = false;
  };
  for (int w = 1; w < workers; ++w) {
    std::int64_t lo = begin + w * chunk;
    std::int64_t hi = lo + chunk < end ? lo + chunk : end;
    if (lo >= hi) break;
    pool.emplace_back(run_range, lo, hi);
  }
  run_range(begin, begin + chunk < end ? begin + chunk : end);
  for (auto& t : pool) t.join();
}

}  // namespace ganaug
