#pragma once

#include <cstddef>
#include <functional>

namespace rcm {

// RCMLAB_THREADS wins over `requested`; values < 1 mean 1.
int ResolveThreads(int requested);

// Calls body(i) for every i in [0, n) on up to `threads` workers. Work is
// handed out through an atomic counter, so results must be written to
// per-index slots to stay independent of scheduling. The first exception is
// rethrown after all workers stop.
void ParallelFor(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace rcm
