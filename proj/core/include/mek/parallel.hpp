#pragma once

#include <cstddef>
#include <functional>

namespace mek {

/// Thread count from MEK_THREADS, else the hardware concurrency (at least 1).
unsigned default_threads();

/// Runs body(i) for i in [0, n) on up to `threads` workers using contiguous
/// chunks. Bodies must write only to disjoint, index-owned state so results do
/// not depend on the thread count. The first exception thrown is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace mek
