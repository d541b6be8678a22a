//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Canonical byte encoding primitives. Every value has exactly one encoding:
// fixed field order, big-endian integers, 32-bit length prefixes on variable
// fields, and no optional fields. Strictness lives in Reader: any deviation
// (truncation, trailing bytes, out-of-range discriminants) is a CodecError,
// which is what makes encode∘decode∘encode = encode hold bytewise.
//

#pragma once

#include <array>
#include <cstdint>

#include "tedge/bytes.hpp"
#include "tedge/errors.hpp"

namespace tedge::wire {

/// Upper bound on any decodable message, applied to frames and variable
/// fields alike.
inline constexpr std::size_t kMaxMessageSize = 1u << 20;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

  /// Raw bytes whose length is fixed by the schema (keys, digests, nonces).
  void fixed(ByteView data) { out_.insert(out_.end(), data.begin(), data.end()); }

  template <std::size_t N>
  void fixed(const std::array<std::uint8_t, N>& data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }

  /// Length-prefixed variable field.
  void var(ByteView data) {
    if (data.size() > kMaxMessageSize) {
      throw CodecError("variable field exceeds message size limit");
    }
    u32(static_cast<std::uint32_t>(data.size()));
    fixed(data);
  }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }

  ByteView fixed(std::size_t n) {
    need(n);
    ByteView v = data_.subspan(pos_, n);
    pos_ += n;
    return v;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed_array() {
    std::array<std::uint8_t, N> out{};
    ByteView v = fixed(N);
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }

  ByteView var() {
    std::uint32_t len = u32();
    if (len > kMaxMessageSize) {
      throw CodecError("variable field exceeds message size limit");
    }
    return fixed(len);
  }

  /// A boolean is canonically 0x00 or 0x01; anything else is rejected so a
  /// value never has two encodings.
  bool boolean() {
    std::uint8_t v = u8();
    if (v > 1) throw CodecError("non-canonical boolean");
    return v == 1;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

  /// Every complete decode must end exactly at the end of input.
  void expect_end() const {
    if (pos_ != data_.size()) throw CodecError("trailing bytes after message");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CodecError("truncated message");
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace tedge::wire
