#pragma once

#include <cstddef>
#include <functional>

namespace slimdet {

// Global worker cap for the tensor kernels. Defaults to the hardware
// concurrency; SLIMDET_THREADS or the CLI --threads flag override it.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous static chunks,
// one worker per chunk, so each index is computed by exactly one worker and
// results do not depend on the number of threads.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace slimdet
