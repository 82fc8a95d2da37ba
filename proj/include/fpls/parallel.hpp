#pragma once

#include <cstddef>
#include <functional>

namespace fpls {

// Worker count: the FPLS_THREADS environment variable when set to a positive
// integer, otherwise std::thread::hardware_concurrency() (at least 1).
int worker_count();

// Runs fn(0) ... fn(count-1) across workers. fn must be independent of
// execution order; with that, results are identical for any worker count.
// The first exception thrown by any fn is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace fpls
