//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <compare>
#include <cstdint>

#include "tedge/bytes.hpp"
#include "tedge/rng.hpp"

namespace tedge::crypto {

// Suite 0x01: Ed25519 signatures, SHA-256 hashing, X25519 agreement,
// XSalsa20-Poly1305 sealing, BLAKE2b key derivation. The byte is carried in
// serialized reports so a future suite can coexist on the wire.
inline constexpr std::uint8_t kSuiteId = 0x01;

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kVerifyingKeySize = 32;
inline constexpr std::size_t kSigningPrivateSize = 64;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kDhPublicSize = 32;
inline constexpr std::size_t kDhPrivateSize = 32;
inline constexpr std::size_t kSharedSecretSize = 32;
inline constexpr std::size_t kMinDeviceSecretSize = 16;

struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};
  auto operator<=>(const Digest&) const = default;
};

struct VerifyingKey {
  std::array<std::uint8_t, kVerifyingKeySize> bytes{};
  auto operator<=>(const VerifyingKey&) const = default;
};

struct Signature {
  std::array<std::uint8_t, kSignatureSize> bytes{};
  auto operator<=>(const Signature&) const = default;
};

struct DhPublic {
  std::array<std::uint8_t, kDhPublicSize> bytes{};
  auto operator<=>(const DhPublic&) const = default;
};

/// 32-byte agreed secret. Never serialized into any protocol message; it only
/// feeds the sealing primitives and channel KDF.
struct SharedSecret {
  std::array<std::uint8_t, kSharedSecretSize> bytes{};
  auto operator<=>(const SharedSecret&) const = default;
};

struct SigningKeypair {
  std::array<std::uint8_t, kSigningPrivateSize> private_key{};
  VerifyingKey public_key;
};

struct DhKeypair {
  std::array<std::uint8_t, kDhPrivateSize> private_key{};
  DhPublic public_key;
};

using SealedBox = Bytes;

Digest hash(ByteView data);

Signature sign(const SigningKeypair& key, ByteView message);

/// Accept/Reject as a bool; malformed signatures reject rather than throw.
bool verify(const VerifyingKey& key, ByteView message, const Signature& sig);

SigningKeypair generate_signing_keypair(RandomSource& rng);

DhKeypair generate_dh_keypair(RandomSource& rng);

/// Deterministic device keypair from the burned secret and the digest of the
/// bootloader that will sign reports. A new bootloader release therefore
/// yields a fresh keypair without reprovisioning. Throws ProvisioningError
/// when the secret is shorter than kMinDeviceSecretSize.
SigningKeypair derive_device_keypair(ByteView device_secret,
                                     const Digest& fsbl_digest);

/// X25519 agreement, then a fixed-label KDF down to 32 bytes. Symmetric in
/// the two keypairs. Throws ChannelError on a degenerate peer element.
SharedSecret dh_agree(const std::array<std::uint8_t, kDhPrivateSize>& private_key,
                      const DhPublic& peer);

/// Authenticated encryption; box layout is nonce || ciphertext+tag.
SealedBox seal(const SharedSecret& secret, ByteView plaintext,
               RandomSource& rng);

/// Throws ChannelError when the secret is wrong or the box was modified.
Bytes open(const SharedSecret& secret, ByteView box);

/// Keyed 32-byte BLAKE2b, used for the channel KDF.
Digest keyed_kdf(const SharedSecret& key, ByteView message);

/// Best-effort erasure of key material still owned by the caller.
void wipe(std::span<std::uint8_t> data);

}  // namespace tedge::crypto
