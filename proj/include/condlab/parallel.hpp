#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "condlab/numerics.hpp"

namespace condlab {

// Worker count: CONDLAB_THREADS if set (clamped to >= 1), else hardware
// concurrency. All parallel loops write disjoint output slots, so results
// are identical for every worker count.
inline int worker_count() {
  if (const char* env = std::getenv("CONDLAB_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(v);
    return 1;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

template <class Fn>
void parallel_for(i64 n, Fn&& fn) {
  int workers = worker_count();
  if (workers <= 1 || n < 128) {
    for (i64 i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = static_cast<int>(std::min<i64>(workers, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    i64 lo = n * w / workers;
    i64 hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (i64 i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace condlab
