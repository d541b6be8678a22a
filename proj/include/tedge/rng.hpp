//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>

#include "tedge/bytes.hpp"

namespace tedge {

/// Byte source behind all key, nonce and fixture generation. Swapping in the
/// deterministic implementation makes whole protocol transcripts reproducible
/// from a single 64-bit seed.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Bytes take(std::size_t n);
  std::uint64_t next_u64();
};

/// OS randomness (libsodium randombytes).
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

/// ChaCha20 keystream keyed from the seed. Equal seeds and equal call
/// sequences yield equal bytes; every fill() starts a fresh stream block so
/// output does not depend on how earlier requests were chunked internally.
class DeterministicRandom final : public RandomSource {
 public:
  explicit DeterministicRandom(std::uint64_t seed);
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::array<std::uint8_t, 32> key_{};
  std::uint64_t calls_ = 0;
};

}  // namespace tedge
