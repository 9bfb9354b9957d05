#pragma once

#include <cstddef>
#include <functional>

namespace decoupler {

/// Worker count used by all parallel loops (0 selects hardware concurrency).
void set_workers(int n);
int workers();

/// Runs body(begin, end) over [0, n) split into contiguous chunks of `chunk` items.
/// Chunk boundaries depend only on n and chunk, so per-index outputs are independent
/// of the worker count. Exceptions thrown by any chunk are rethrown on the caller.
void parallel_for(std::size_t n, std::size_t chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace decoupler
