#pragma once

#include <cstddef>
#include <functional>

namespace syntaxnav {

// Worker count: SYNTAXNAV_THREADS if set (>= 1), else hardware concurrency.
int worker_count();

// Calls fn(i) for i in [0, n), possibly concurrently. fn must only write
// state owned by index i. Exceptions are rethrown (lowest index first).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace syntaxnav
