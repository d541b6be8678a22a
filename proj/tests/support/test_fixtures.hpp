//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Shared builders for tests: signed bootloaders and ready-to-boot devices.
//

#pragma once

#include "tedge/crypto.hpp"
#include "tedge/device.hpp"
#include "tedge/messages.hpp"
#include "tedge/rng.hpp"

namespace testsupport {

inline tedge::wire::FsblImage make_signed_fsbl(
    const tedge::Bytes& code, const tedge::crypto::SigningKeypair& key) {
  tedge::wire::FsblImage f;
  f.code_bytes = code;
  f.public_key = key.public_key;
  f.signature = tedge::crypto::sign(key, tedge::as_view(code));
  return f;
}

struct BootKit {
  tedge::crypto::SigningKeypair boot_key;
  tedge::wire::FsblImage fsbl;
  tedge::crypto::Digest fsbl_digest;
  tedge::crypto::Digest boot_key_hash;
  tedge::device::SystemImage image;
};

inline BootKit make_boot_kit(tedge::RandomSource& rng,
                             bool reconfig_enabled = false) {
  BootKit kit;
  kit.boot_key = tedge::crypto::generate_signing_keypair(rng);
  kit.fsbl = make_signed_fsbl(rng.take(256), kit.boot_key);
  kit.fsbl_digest = tedge::crypto::hash(tedge::as_view(kit.fsbl.code_bytes));
  kit.boot_key_hash =
      tedge::crypto::hash(tedge::ByteView(kit.fsbl.public_key.bytes));
  kit.image.bitstream.bytes = rng.take(512);
  kit.image.bitstream.label = "P+";
  kit.image.bitstream.reconfig_enabled = reconfig_enabled;
  kit.image.os_payload = rng.take(128);
  return kit;
}

struct ReadyDevice {
  tedge::device::EmulatedDevice* dev = nullptr;
  tedge::device::DevicePublicRecord record;
  tedge::Bytes secret;
};

/// Manufacture, provision and (optionally) boot one device against the kit.
inline ReadyDevice make_ready_device(tedge::device::Manufacturer& factory,
                                     const BootKit& kit,
                                     tedge::RandomSource& rng,
                                     std::uint64_t serial, bool do_boot = true) {
  ReadyDevice ready;
  ready.dev = &factory.manufacture(serial);
  ready.secret = rng.take(32);
  ready.record = ready.dev->provision(tedge::as_view(ready.secret),
                                      kit.boot_key_hash, kit.fsbl_digest);
  if (do_boot) {
    ready.dev->boot(kit.fsbl, kit.image, rng);
  }
  return ready;
}

}  // namespace testsupport
