//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tedge {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_view(const Bytes& b) { return {b.data(), b.size()}; }

Bytes to_bytes(std::string_view s);

std::string to_hex(ByteView data);

/// Inverse of to_hex. Throws Error on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

/// True if needle occurs as a contiguous subsequence of haystack.
bool contains(ByteView haystack, ByteView needle);

Bytes concat(std::initializer_list<ByteView> parts);

}  // namespace tedge
