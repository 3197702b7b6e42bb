#pragma once

#include <cstdint>
#include <functional>

namespace neid {

/// Worker thread count: min(hardware threads, NEID_THREADS) when the env var
/// is set, otherwise hardware threads. Always at least 1.
int worker_threads();

/// Runs fn(i) for every i in [begin, end), split into contiguous chunks
/// across worker threads. fn must only write state owned by index i, which
/// keeps results identical to the serial loop. Nested calls run serially in
/// the calling thread.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace neid
