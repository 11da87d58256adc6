// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

namespace dipfuse {

// Process-wide worker pool for data-parallel loops over channels/planes.
// Every item is a pure function of its index, so results are identical for
// any worker count; the pool only changes wall-clock time. Worker count
// comes from DIPFUSE_THREADS or hardware_concurrency. Concurrent or nested
// parallel_for calls degrade to inline execution rather than deadlock.
void parallel_for(int n, const std::function<void(int)>& fn);

int worker_count();

}  // namespace dipfuse
