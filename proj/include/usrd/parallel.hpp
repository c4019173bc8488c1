#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace usrd {

// Thread budget: USRD_THREADS env var, 0 or unset = hardware concurrency.
inline unsigned thread_budget() {
  static unsigned cached = [] {
    const char* env = std::getenv("USRD_THREADS");
    if (env) {
      long v = std::strtol(env, nullptr, 10);
      if (v > 0) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1u;
  }();
  return cached;
}

namespace detail {
inline thread_local bool g_inside_parallel = false;
}

// Index-parallel loop. Results must be written to preallocated slots keyed by
// index so output is independent of scheduling. Nested invocations run
// serially instead of oversubscribing.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  unsigned nthreads = thread_budget();
  if (n == 0) return;
  if (nthreads <= 1 || n == 1 || detail::g_inside_parallel) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  if (nthreads > n) nthreads = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (unsigned t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      detail::g_inside_parallel = true;
      try {
        for (std::size_t i = t; i < n; i += nthreads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace usrd
