#pragma once

#include <cstddef>
#include <functional>

namespace driftlab {

/// Worker count: DRIFTLAB_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
int worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; callers write results into per-index slots so the outcome
/// does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace driftlab
