// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace dipfuse {

// Mirror index into [0, extent) without repeating the edge sample
// (-1 -> 1, -2 -> 2, extent -> extent-2, ...). Valid for any offset via the
// period 2*extent-2. An extent of 1 has no mirror; it degrades to replication,
// which is what convolution padding wants for 1-wide planes. Callers that must
// reject that case (image padding) check the extent themselves.
inline int reflect_index(int i, int extent) {
  if (extent <= 1) return 0;
  const int period = 2 * extent - 2;
  i %= period;
  if (i < 0) i += period;
  return i < extent ? i : period - i;
}

}  // namespace dipfuse
