#pragma once

#include <cstdint>
#include <functional>

namespace spwm::numcore {

// Global worker pool. set_threads(1) runs everything inline.
// Work is split into fixed contiguous chunks so each output element is
// produced by exactly one worker with a fixed inner loop order; results are
// bit-identical for a given thread count.
void set_threads(int n);
int thread_count();

// Calls fn(begin, end) on contiguous partitions of [0, n).
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace spwm::numcore
