#pragma once

#include <functional>

namespace uscnn {

/// Worker thread cap: USCNN_THREADS when set, otherwise machine parallelism.
int worker_thread_count();

/// Runs fn(i) for i in [0, count). Work is split into contiguous ranges,
/// one per worker; each index is processed by exactly one thread, so
/// results are identical for any thread count as long as the ranges
/// write disjoint outputs.
void parallel_for(int count, const std::function<void(int)>& fn);

}  // namespace uscnn
