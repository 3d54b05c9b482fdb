#pragma once

#include <functional>

#include "vpfd/tensor.hpp"

namespace vpfd::nn {

// Deterministic batch-axis parallelism: [0, n) is split into at most
// `worker_count()` contiguous chunks with a fixed partition, so results are
// byte-identical run to run for a fixed thread setting. VPFD_THREADS=1
// forces serial execution.
int worker_count();
void parallel_n(Index n, const std::function<void(Index begin, Index end, int tid)>& fn);

}  // namespace vpfd::nn
