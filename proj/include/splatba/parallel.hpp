#pragma once

#include <cstddef>
#include <functional>

namespace splatba {

/// Worker count for a request: 0 means hardware concurrency. The
/// SPLATBA_THREADS environment variable caps the result when set.
int resolve_thread_count(int requested);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
/// claimed dynamically, so fn must only write state owned by index i.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace splatba
