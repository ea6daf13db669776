#pragma once

#include <cstddef>
#include <functional>

namespace papnf {

/// Worker count: PAPNF_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Run body(i) for i in [0, n) over up to `threads` workers. Each index is
/// processed exactly once; callers write results into index-addressed slots so
/// the outcome is independent of the thread count. The first exception thrown
/// by any worker is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t threads = worker_count());

}  // namespace papnf
