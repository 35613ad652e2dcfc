#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

#include "dgmm/linalg.hpp"

namespace dgmm {

// Worker count, capped by the DGMM_THREADS environment variable.
inline int thread_cap() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("DGMM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v < static_cast<long>(hw)) hw = static_cast<unsigned>(v);
  }
  return static_cast<int>(hw);
}

// Static chunking over [begin, end). Each index's work must be independent
// (disjoint writes), which keeps results identical for any thread count.
template <typename Fn>
void parallel_for(Index begin, Index end, Fn&& fn) {
  const Index count = end - begin;
  const int threads = thread_cap();
  if (threads <= 1 || count < 2) {
    for (Index i = begin; i < end; ++i) fn(i);
    return;
  }
  const int used = static_cast<int>(
      std::min<Index>(count, static_cast<Index>(threads)));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(used));
  for (int t = 0; t < used; ++t) {
    const Index lo = begin + count * t / used;
    const Index hi = begin + count * (t + 1) / used;
    pool.emplace_back([lo, hi, &fn] {
      for (Index i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace dgmm
