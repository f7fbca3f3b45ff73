#pragma once

#include <cstddef>
#include <functional>

namespace limi {

/// Worker count from LIMI_WORKERS, else the hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls fn(begin, end) on contiguous slices of [0, n) across worker_count() threads.
/// Slices are fixed by n and the worker count, so results written per index are
/// deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace limi
