#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace orbit {

/// Runs fn(i) for i in [0, n) on `workers` OpenMP threads (dynamic schedule).
/// workers <= 1 runs the plain serial loop. Exceptions never cross the
/// parallel region: the first one (lowest index) is rethrown after the join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Default worker count: hardware concurrency, at least 1.
int default_workers();

}  // namespace orbit
