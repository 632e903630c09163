#pragma once

#include <cstddef>
#include <functional>

namespace bassmt {

// Worker cap for library-internal parallel loops. Zero means "use the
// BASSMT_THREADS environment variable, else the hardware concurrency".
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [0, n) on up to thread_count() workers using static
// contiguous chunks. Results must not depend on the schedule: each index owns
// its output slot. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bassmt
