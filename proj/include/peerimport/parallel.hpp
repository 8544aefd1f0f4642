#pragma once

#include <cstddef>
#include <functional>

namespace peerimport {

// Worker count from PEERIMPORT_THREADS, else hardware concurrency (min 1).
unsigned thread_count();

// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
// depend only on n and the worker count; callers write to disjoint slots so
// results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 1024);

}  // namespace peerimport
