#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace fracinv {

void set_default_threads(int n);
int default_threads();

// Static partition of [0, n); f(i) must only write to slot i so the result is
// independent of the thread count.
template <class F>
void parallel_for(std::size_t n, F&& f, int threads = 0) {
  if (threads <= 0) threads = default_threads();
  const std::size_t nt = std::min<std::size_t>(std::max(threads, 1), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nt);
  for (std::size_t t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += nt) f(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fracinv
