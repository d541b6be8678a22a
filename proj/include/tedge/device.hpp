//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Emulation of one ARM/FPGA SoC: the Boot ROM → FSBL → Secure OS chain, the
// one-time-programmable store, the TrustZone-partitioned address map, and a
// single PL (fabric) slot with gated reconfiguration. The emulator is
// behavioral — no instruction set, just the trust-relevant state machine.
//

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tedge/bytes.hpp"
#include "tedge/crypto.hpp"
#include "tedge/messages.hpp"
#include "tedge/protocol.hpp"
#include "tedge/rng.hpp"

namespace tedge::device {

enum class WorldTag : std::uint8_t { kSecure, kNormal };
enum class RegionKind : std::uint8_t { kRam, kPlMmio, kReconfigPort };
enum class AccessKind : std::uint8_t { kRead, kWrite };
enum class AccessResult : std::uint8_t { kAllowed, kDenied };

const char* to_string(WorldTag world);

struct Region {
  std::uint64_t base = 0;
  std::uint64_t size = 0;
  WorldTag world = WorldTag::kSecure;
  RegionKind kind = RegionKind::kRam;
};

/// Immutable, non-overlapping region table fixed at construction.
class AddressSpace {
 public:
  explicit AddressSpace(std::vector<Region> regions);

  /// The default SoC map: normal-world DDR and peripherals, secure on-chip
  /// RAM, and all PL windows and the configuration port in the secure world.
  static AddressSpace default_map();

  AccessResult check(std::uint64_t address, WorldTag world) const;
  const std::vector<Region>& regions() const { return regions_; }

 private:
  std::vector<Region> regions_;
};

/// An FPGA design image. The capability flag mirrors a design choosing to
/// expose (or tie off) the internal configuration port; like the label, it is
/// not part of the measurement, which covers the configuration bytes only.
struct BitstreamImage {
  Bytes bytes;
  std::string label;
  bool reconfig_enabled = false;
};

/// What the FSBL measures and hands to the secure world: the PL design plus
/// the secure-OS payload.
struct SystemImage {
  BitstreamImage bitstream;
  Bytes os_payload;
};

/// Digest over both payloads, each length-prefixed so the boundary between
/// them is part of the measured data.
crypto::Digest measure(const SystemImage& image);

/// eFUSE analog. The secret is reachable only through the stage-gated
/// accessor on EmulatedDevice, never directly.
struct OtpStore {
  std::uint64_t serial_number = 0;
  std::array<std::uint8_t, 32> device_secret{};
  crypto::Digest boot_key_hash;
  bool locked = false;
};

enum class BootStage : std::uint8_t {
  kPoweredOff,
  kBootRom,
  kFsbl,
  kSecureOs,
  kFailSecure,
};

const char* to_string(BootStage stage);

/// What provisioning publishes: the identity → key binding for one approved
/// bootloader version.
struct DevicePublicRecord {
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  crypto::VerifyingKey device_public_key;
};

struct BootOutcome {
  BootStage stage = BootStage::kFailSecure;
  std::optional<wire::AttestationReport> report;
};

class Manufacturer;

class EmulatedDevice {
 public:
  std::uint64_t serial_number() const { return otp_.serial_number; }
  BootStage stage() const { return stage_; }
  bool provisioned() const { return otp_.locked; }

  /// Burn the secret, the boot-key hash and the key binding into OTP, lock
  /// it, and return the public record destined for the registry. The device
  /// key is bound to the digest of the bootloader expected to sign reports.
  DevicePublicRecord provision(ByteView device_secret,
                               const crypto::Digest& boot_key_hash,
                               const crypto::Digest& expected_fsbl_digest);

  /// Run the measured boot chain. Boot ROM: key-hash check then signature
  /// check, failure → FailSecure with no report. FSBL: measure, derive the
  /// device key, mint session keys, sign the report, erase its working copies
  /// of the secret material, hand off to the Secure OS.
  BootOutcome boot(const wire::FsblImage& fsbl, const SystemImage& image,
                   RandomSource& rng);

  /// Secure-OS challenge service. LifecycleError outside SecureOs.
  wire::ChallengeResponse respond(const wire::Challenge& challenge);

  /// Open/seal on the channel derived from the last served challenge.
  /// ChannelError when no challenge has been served or unsealing fails.
  Bytes channel_open(ByteView box) const;
  crypto::SealedBox channel_seal(ByteView plaintext, RandomSource& rng) const;

  /// World-checked memory access. LifecycleError unless booted.
  AccessResult access(std::uint64_t address, WorldTag world, AccessKind op);

  /// Replace the PL design. Secure world only, and only if the loaded design
  /// left the configuration port enabled; the boot-time measurement is
  /// flagged stale (and counted) but remains trusted.
  AccessResult reconfigure_pl(WorldTag world, const BitstreamImage& bitstream);

  /// Full power cycle: back to PoweredOff, all session state gone. OTP—being
  /// fuses—survives.
  void reset();

  /// One-time-programmable secret, readable only while the boot chain
  /// (Boot ROM / FSBL) is executing; AccessDeniedError at any other stage.
  ByteView otp_device_secret() const;

  /// Everything a normal-world application could read: serial number, the
  /// published report, the loaded PL design and OS payload, and the FSBL's
  /// (wiped) scratch RAM. Used by leak-scan tests.
  Bytes application_visible_bytes() const;

  const std::optional<wire::AttestationReport>& report() const {
    return report_;
  }
  const AddressSpace& address_space() const { return address_space_; }
  bool measurement_stale() const { return measurement_stale_; }
  std::size_t reconfigure_count() const { return reconfigure_count_; }

  /// Simulation observability for channel-agreement assertions; a real
  /// device would never export this.
  std::optional<crypto::SharedSecret> channel_secret() const;

 private:
  friend class Manufacturer;
  explicit EmulatedDevice(std::uint64_t serial);

  void fail_secure();
  void require_stage(BootStage expected, const char* what) const;

  OtpStore otp_;
  crypto::Digest provisioned_fsbl_digest_;
  BootStage stage_ = BootStage::kPoweredOff;
  AddressSpace address_space_;

  // Secure-world session state, populated by a successful boot.
  std::optional<wire::AttestationReport> report_;
  std::optional<crypto::SigningKeypair> session_signing_;
  std::optional<crypto::DhKeypair> session_dh_;
  crypto::VerifyingKey device_public_;
  std::optional<proto::SessionContext> session_ctx_;
  std::optional<proto::SecureChannel> channel_;

  // FSBL working RAM: holds the secret and device private key during boot,
  // zeroed before handoff. Deliberately part of application_visible_bytes so
  // a missed wipe is caught by the leak scan.
  Bytes boot_scratch_;

  BitstreamImage pl_slot_;
  Bytes os_payload_;
  bool measurement_stale_ = false;
  std::size_t reconfigure_count_ = 0;
};

/// Allocates distinct serial numbers and keeps the manufacturing record
/// (serials only — the manufacturer never learns what a device will run).
class Manufacturer {
 public:
  EmulatedDevice& manufacture(std::uint64_t serial_number);

  /// Serialized manufacturing record, scanned by privacy tests.
  Bytes record_bytes() const;

  std::size_t device_count() const { return devices_.size(); }

 private:
  std::vector<std::unique_ptr<EmulatedDevice>> devices_;
  std::vector<std::uint64_t> serials_;
};

/// In-process transport serving one device: challenges yield responses,
/// sealed messages are opened and echoed back sealed. Serializes access so
/// concurrent verifier sessions see a single-threaded device.
class DeviceEndpoint : public proto::Transport {
 public:
  DeviceEndpoint(EmulatedDevice& dev, RandomSource& rng)
      : device_(dev), rng_(rng) {}

  Bytes round_trip(ByteView framed_request) override;

 private:
  EmulatedDevice& device_;
  RandomSource& rng_;
  std::mutex mu_;
};

}  // namespace tedge::device
