#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include "bkdt/core.hpp"

namespace bkdt {

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, count) on up to `threads` threads using contiguous
/// blocks. fn must only touch state owned by index i.
template <typename Fn>
void parallel_for(Index count, int threads, Fn&& fn) {
  if (count <= 0) return;
  const Index workers = std::clamp<Index>(threads, 1, count);
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      const Index begin = count * w / workers;
      const Index end = count * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        try {
          for (Index i = begin; i < end; ++i) fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace bkdt
