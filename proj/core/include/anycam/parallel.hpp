#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace anycam {

// Worker cap: min(hardware_concurrency, ANYCAM_THREADS) with ANYCAM_THREADS >= 1.
// Read once per process.
int worker_count();

// Runs fn(block_index, begin, end) over [0, n) split into `blocks` contiguous
// ranges. The block layout is independent of the worker count, so callers that
// accumulate one partial result per block and combine them in block order get
// bit-identical results for any ANYCAM_THREADS setting.
void parallel_blocks(std::size_t n, std::size_t blocks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)> &fn);

// Convenience: one task per index in [0, n), same determinism contract.
void parallel_for_each(std::size_t n,
                       const std::function<void(std::size_t)> &fn);

// Deterministic parallel sum: evaluates term(i) for i in [0, n) and adds the
// per-block partial sums in block order.
double parallel_sum(std::size_t n, const std::function<double(std::size_t)> &term);

} // namespace anycam
