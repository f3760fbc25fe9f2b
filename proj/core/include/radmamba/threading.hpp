#pragma once
// Worker pool helpers for independent runs (seed sweeps, ablation cells).
// RADMAMBA_THREADS caps the pool size.

#include <cstdint>
#include <functional>

namespace radmamba {

// Worker count from RADMAMBA_THREADS, clamped to [1, hardware_concurrency].
int worker_count();

// Runs fn(0..n-1) on up to worker_count() threads. Tasks must be independent;
// results keyed by index stay deterministic regardless of the pool size.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace radmamba
