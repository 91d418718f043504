#pragma once

#include <cstddef>
#include <functional>

namespace dgstab {

/// Thread count from the DG_THREADS environment variable, falling back to
/// the hardware concurrency. Always at least 1.
unsigned threads_from_env();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are
/// claimed dynamically, so callers must write results by index; the first
/// exception thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace dgstab
