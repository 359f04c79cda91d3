#pragma once

#include <cstddef>
#include <functional>

namespace reskit {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must be
// independent; each writes only to its own output slot, so the result does
// not depend on the worker count or on scheduling. workers <= 1 runs inline.
// The first exception thrown by any item is rethrown on the caller's thread.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace reskit
