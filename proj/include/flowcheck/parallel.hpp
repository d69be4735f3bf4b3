#pragma once

#include <cstddef>
#include <functional>

namespace flowcheck {

// Runs fn(0..n-1) across a small thread pool. Jobs must be independent and
// write to disjoint slots; output is then identical for any thread count.
// threads == 0 picks hardware concurrency; threads == 1 runs inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

// Process-wide default used when threads == 0 (settable by the CLI).
void set_default_threads(int threads);
int default_threads();

}  // namespace flowcheck
