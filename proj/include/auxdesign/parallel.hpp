#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

#include "auxdesign/core.hpp"

namespace auxdesign {

/// Runs fn(i) for i in [0, count). Work is split into contiguous blocks over
/// thread_count() workers; callers write results by index, so the output is
/// identical for any thread count.
namespace detail {
inline thread_local bool in_worker = false;
}

/// Nested calls from inside a worker run serially.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers =
      detail::in_worker ? 1 : std::min<std::size_t>(static_cast<std::size_t>(std::max(1, thread_count())), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::in_worker = true;
      try {
        const std::size_t lo = w * block;
        const std::size_t hi = std::min(count, lo + block);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace auxdesign
