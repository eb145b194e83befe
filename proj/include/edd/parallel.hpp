#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace edd {

// Static partition of [0, n) over at most `threads` workers. Each index is
// handled by exactly one worker, so per-index results do not depend on the
// thread count.
template <class F>
void parallel_for(int n, int threads, F&& f) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w * n / threads; i < (w + 1) * n / threads; ++i) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace edd
