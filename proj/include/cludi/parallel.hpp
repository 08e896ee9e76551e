#pragma once

#include <cstddef>
#include <functional>

namespace cludi {

// Worker count: CLUDI_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_count();

// Splits [0, n) into contiguous blocks and runs fn(begin, end) on each,
// possibly concurrently. Blocks must not share mutable state. The first
// exception thrown by any block is rethrown after all blocks finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace cludi
