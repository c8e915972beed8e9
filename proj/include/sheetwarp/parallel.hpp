#pragma once

#include <functional>

namespace sheetwarp {

/// Process-wide worker count used by parallel kernels. 0 selects the
/// hardware concurrency. Results never depend on this value.
void set_default_threads(int threads);
int default_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Work items are claimed dynamically; fn must write only to slot i.
void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0);

/// Splits [0, rows) into contiguous bands, one call per band.
void parallel_bands(int rows, const std::function<void(int, int)>& fn, int threads = 0);

}  // namespace sheetwarp
