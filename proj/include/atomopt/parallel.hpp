#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace atomopt {

/// Worker count resolution: explicit value wins, then ATOMOPT_WORKERS, then
/// hardware concurrency.
int resolve_workers(int requested);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Callers must write
/// results into per-index slots; reductions happen afterwards in index order
/// so the outcome is independent of scheduling.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace atomopt
