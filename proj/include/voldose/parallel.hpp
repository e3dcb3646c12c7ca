#pragma once

#include <cstdint>
#include <functional>

namespace voldose {

// Worker cap for data-parallel loops. Results never depend on this value:
// parallel_for only ever splits index ranges whose iterations write to
// disjoint locations.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Iterations must be independent.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

// Runs fn(begin, end) over contiguous chunks of [0, n).
void parallel_for_chunks(std::int64_t n,
                         const std::function<void(std::int64_t, std::int64_t)>& fn);

} // namespace voldose
