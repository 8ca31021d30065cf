#pragma once

#include <functional>

namespace conslaw {

/// Worker count: CONSLAW_THREADS if set (>= 1), else hardware concurrency.
int worker_count();

/// Runs fn(c) for c in [0, nchunks). Chunks are claimed dynamically but the
/// caller merges per-chunk results in chunk order, so results do not depend
/// on the worker count.
void parallel_chunks(int nchunks, const std::function<void(int)>& fn);

}  // namespace conslaw
