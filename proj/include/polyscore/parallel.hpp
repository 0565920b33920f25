#pragma once

#include <cstddef>
#include <functional>

namespace polyscore {

/// Worker count: hardware concurrency, capped by POLYSCORE_THREADS if set.
std::size_t thread_count();

/// Runs body(chunk) for chunk in [0, chunks). Chunks are claimed dynamically
/// by up to thread_count() workers; callers keep per-chunk results and merge
/// them in chunk order so the outcome does not depend on scheduling.
void parallel_chunks(std::size_t chunks, const std::function<void(std::size_t)>& body);

}  // namespace polyscore
