#pragma once

#include <functional>

namespace mvb {

// Worker cap: min(hardware threads, MVB_THREADS if set). At least 1.
int max_threads();

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. Chunk boundaries depend only on n and the worker count, and callers
// are expected to write disjoint outputs (or reduce per-chunk results in index
// order), so results stay deterministic.
void parallel_for(int n, const std::function<void(int, int)>& fn);

}  // namespace mvb
