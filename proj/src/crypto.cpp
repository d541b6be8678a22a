//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/crypto.hpp"

#include <sodium.h>

#include <cstring>

#include "tedge/errors.hpp"

namespace tedge::crypto {

namespace {

void ensure_sodium() {
  if (sodium_init() < 0) {
    throw Error("libsodium initialization failed");
  }
}

}  // namespace

Digest hash(ByteView data) {
  ensure_sodium();
  Digest out;
  crypto_hash_sha256(out.bytes.data(), data.data(), data.size());
  return out;
}

Signature sign(const SigningKeypair& key, ByteView message) {
  ensure_sodium();
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, message.data(),
                       message.size(), key.private_key.data());
  return sig;
}

bool verify(const VerifyingKey& key, ByteView message, const Signature& sig) {
  ensure_sodium();
  return crypto_sign_verify_detached(sig.bytes.data(), message.data(),
                                     message.size(), key.bytes.data()) == 0;
}

SigningKeypair generate_signing_keypair(RandomSource& rng) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_sign_SEEDBYTES> seed{};
  rng.fill(seed);
  SigningKeypair kp;
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.private_key.data(),
                           seed.data());
  wipe(seed);
  return kp;
}

DhKeypair generate_dh_keypair(RandomSource& rng) {
  ensure_sodium();
  DhKeypair kp;
  rng.fill(kp.private_key);
  crypto_scalarmult_base(kp.public_key.bytes.data(), kp.private_key.data());
  return kp;
}

SigningKeypair derive_device_keypair(ByteView device_secret,
                                     const Digest& fsbl_digest) {
  ensure_sodium();
  if (device_secret.size() < kMinDeviceSecretSize) {
    throw ProvisioningError("device secret too short for key derivation");
  }

  // Domain-separated derivation: the seed commits to both the device secret
  // and the bootloader measurement, so a new bootloader release yields a
  // fresh device identity without touching the hardware secret.
  static constexpr char kLabel[] = "tedge-devkey-v1";

  // BLAKE2b keys are capped at 64 bytes; longer secrets are pre-hashed.
  std::array<std::uint8_t, 64> key_material{};
  std::size_t key_len = 0;
  if (device_secret.size() <= key_material.size()) {
    std::memcpy(key_material.data(), device_secret.data(),
                device_secret.size());
    key_len = device_secret.size();
  } else {
    crypto_generichash(key_material.data(), key_material.size(),
                       device_secret.data(), device_secret.size(), nullptr, 0);
    key_len = key_material.size();
  }

  std::array<std::uint8_t, crypto_sign_SEEDBYTES> seed{};
  crypto_generichash_state st;
  crypto_generichash_init(&st, key_material.data(), key_len, seed.size());
  crypto_generichash_update(&st, fsbl_digest.bytes.data(),
                            fsbl_digest.bytes.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(kLabel),
                            sizeof(kLabel) - 1);
  crypto_generichash_final(&st, seed.data(), seed.size());
  wipe(key_material);

  SigningKeypair kp;
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.private_key.data(),
                           seed.data());
  wipe(seed);
  return kp;
}

SharedSecret dh_agree(
    const std::array<std::uint8_t, kDhPrivateSize>& private_key,
    const DhPublic& peer) {
  ensure_sodium();
  std::array<std::uint8_t, crypto_scalarmult_BYTES> q{};
  if (crypto_scalarmult(q.data(), private_key.data(), peer.bytes.data()) != 0) {
    throw ChannelError("degenerate peer element in key agreement");
  }

  // Hash the raw point through a labelled KDF so the shared secret is
  // uniformly distributed and bound to this protocol.
  static constexpr char kLabel[] = "tedge-dh-v1";
  SharedSecret out;
  crypto_generichash_state st;
  crypto_generichash_init(&st, q.data(), q.size(), out.bytes.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(kLabel),
                            sizeof(kLabel) - 1);
  crypto_generichash_final(&st, out.bytes.data(), out.bytes.size());
  wipe(q);
  return out;
}

SealedBox seal(const SharedSecret& secret, ByteView plaintext,
               RandomSource& rng) {
  ensure_sodium();
  SealedBox box(crypto_secretbox_NONCEBYTES + plaintext.size() +
                crypto_secretbox_MACBYTES);
  rng.fill(std::span<std::uint8_t>(box.data(), crypto_secretbox_NONCEBYTES));
  crypto_secretbox_easy(box.data() + crypto_secretbox_NONCEBYTES,
                        plaintext.data(), plaintext.size(), box.data(),
                        secret.bytes.data());
  return box;
}

Bytes open(const SharedSecret& secret, ByteView box) {
  ensure_sodium();
  if (box.size() < crypto_secretbox_NONCEBYTES + crypto_secretbox_MACBYTES) {
    throw ChannelError("sealed message too short");
  }
  const std::size_t ct_len = box.size() - crypto_secretbox_NONCEBYTES;
  Bytes plain(ct_len - crypto_secretbox_MACBYTES);
  if (crypto_secretbox_open_easy(plain.data(),
                                 box.data() + crypto_secretbox_NONCEBYTES,
                                 ct_len, box.data(),
                                 secret.bytes.data()) != 0) {
    throw ChannelError("sealed message failed authentication");
  }
  return plain;
}

Digest keyed_kdf(const SharedSecret& key, ByteView message) {
  ensure_sodium();
  Digest out;
  crypto_generichash(out.bytes.data(), out.bytes.size(), message.data(),
                     message.size(), key.bytes.data(), key.bytes.size());
  return out;
}

void wipe(std::span<std::uint8_t> data) {
  if (!data.empty()) sodium_memzero(data.data(), data.size());
}

}  // namespace tedge::crypto
