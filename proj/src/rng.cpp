//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/rng.hpp"

#include <sodium.h>

#include <cstring>

#include "tedge/errors.hpp"

namespace tedge {

namespace {

void ensure_sodium() {
  if (sodium_init() < 0) {
    throw Error("libsodium initialization failed");
  }
}

}  // namespace

Bytes RandomSource::take(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

std::uint64_t RandomSource::next_u64() {
  std::array<std::uint8_t, 8> buf{};
  fill(buf);
  std::uint64_t v = 0;
  for (std::uint8_t b : buf) v = (v << 8) | b;
  return v;
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
  ensure_sodium();
  randombytes_buf(out.data(), out.size());
}

DeterministicRandom::DeterministicRandom(std::uint64_t seed) {
  ensure_sodium();
  std::array<std::uint8_t, 8> seed_bytes{};
  for (int i = 7; i >= 0; --i) {
    seed_bytes[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(seed & 0xff);
    seed >>= 8;
  }
  static constexpr char kLabel[] = "tedge-rng-v1";
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, key_.size());
  crypto_generichash_update(&st, seed_bytes.data(), seed_bytes.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(kLabel),
                            sizeof(kLabel) - 1);
  crypto_generichash_final(&st, key_.data(), key_.size());
}

void DeterministicRandom::fill(std::span<std::uint8_t> out) {
  // One ChaCha20 nonce per fill() call, so the stream never repeats.
  std::array<std::uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
  std::uint64_t c = calls_++;
  for (int i = 7; i >= 0; --i) {
    nonce[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(c & 0xff);
    c >>= 8;
  }
  if (out.empty()) return;
  crypto_stream_chacha20(out.data(), out.size(), nonce.data(), key_.data());
}

}  // namespace tedge
