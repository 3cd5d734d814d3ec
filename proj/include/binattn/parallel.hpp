#pragma once

#include <cstddef>
#include <functional>

namespace binattn {

// Global cap on worker threads for the library's internal parallelism.
// n <= 0 resets to hardware concurrency.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over a static partition of [0, n). Chunks are
// contiguous and disjoint, so any kernel that only writes its own range
// produces identical results for every thread count.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace binattn
