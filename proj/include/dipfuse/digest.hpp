// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dipfuse {

/// SHA-256 of a byte buffer, as a lowercase hex string.
std::string sha256_hex(const uint8_t* data, size_t len);
std::string sha256_hex(const std::vector<uint8_t>& data);

}  // namespace dipfuse
