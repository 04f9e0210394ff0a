#pragma once

#include <functional>

namespace dclab {

// Process-wide worker count. Initialized from DCLAB_THREADS when set,
// otherwise hardware concurrency. Results never depend on it: every
// parallel_for index writes disjoint state in a fixed per-index order.
int thread_count();
void set_thread_count(int n);

// Static partition of [begin, end) over thread_count() workers.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace dclab
