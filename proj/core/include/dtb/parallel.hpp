#pragma once

#include <cstddef>
#include <functional>

namespace dtb {

// Worker count: DTB_ENGINE_THREADS wins over `requested`; 0 means "all logical cores".
unsigned resolve_thread_count(unsigned requested = 0);

// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend
// only on n and the worker count, and each index is visited exactly once, so a
// body that writes only to its own indices gives results independent of `workers`.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace dtb
