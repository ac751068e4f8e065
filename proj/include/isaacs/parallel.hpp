#pragma once

#include <cstddef>
#include <functional>

namespace isaacs {

/// Caps worker parallelism process-wide. 0 restores the hardware default.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs fn(begin, end) over a partition of [0, n) across worker threads.
/// Chunks are contiguous and their boundaries depend only on (n, worker
/// count), never on scheduling. Falls back to a single inline call for
/// small n. Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_grain = 2048);

} // namespace isaacs
