#pragma once

#include <functional>

namespace feast {

// Worker cap: FEAST_THREADS when set to a positive integer, otherwise the
// hardware concurrency, never less than 1.
int worker_count();

// Runs fn(begin, end) over contiguous chunks of [0, n), on up to
// worker_count() threads. Ranges below 256 run inline, where thread startup
// would dominate the work. fn must write only to per-index disjoint state;
// results are then independent of the thread count.
void parallel_for(int n, const std::function<void(int, int)>& fn);

} // namespace feast
