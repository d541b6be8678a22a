//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/device.hpp"

#include <algorithm>
#include <cstring>

#include "tedge/codec.hpp"
#include "tedge/errors.hpp"

namespace tedge::device {

const char* to_string(WorldTag world) {
  return world == WorldTag::kSecure ? "secure" : "normal";
}

const char* to_string(BootStage stage) {
  switch (stage) {
    case BootStage::kPoweredOff:
      return "powered_off";
    case BootStage::kBootRom:
      return "boot_rom";
    case BootStage::kFsbl:
      return "fsbl";
    case BootStage::kSecureOs:
      return "secure_os";
    case BootStage::kFailSecure:
      return "fail_secure";
  }
  return "unknown";
}

// ---- AddressSpace -----------------------------------------------------------

AddressSpace::AddressSpace(std::vector<Region> regions)
    : regions_(std::move(regions)) {
  std::sort(regions_.begin(), regions_.end(),
            [](const Region& a, const Region& b) { return a.base < b.base; });
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const Region& r = regions_[i];
    if (r.size == 0) throw Error("zero-sized address region");
    if (r.base + r.size < r.base) throw Error("address region wraps");
    if (i + 1 < regions_.size() && r.base + r.size > regions_[i + 1].base) {
      throw Error("overlapping address regions");
    }
  }
}

AddressSpace AddressSpace::default_map() {
  return AddressSpace({
      // DDR available to applications.
      {0x0000'0000, 0x4000'0000, WorldTag::kNormal, RegionKind::kRam},
      // Two AXI windows into the PL fabric.
      {0x4000'0000, 0x4000'0000, WorldTag::kSecure, RegionKind::kPlMmio},
      {0x8000'0000, 0x4000'0000, WorldTag::kSecure, RegionKind::kPlMmio},
      // Shared peripheral block (UARTs and friends).
      {0xe000'0000, 0x0100'0000, WorldTag::kNormal, RegionKind::kRam},
      // Configuration-port registers used for partial reconfiguration.
      {0xf807'2000, 0x0000'1000, WorldTag::kSecure, RegionKind::kReconfigPort},
      // On-chip RAM where the secure monitor lives.
      {0xfffc'0000, 0x0004'0000, WorldTag::kSecure, RegionKind::kRam},
  });
}

AccessResult AddressSpace::check(std::uint64_t address, WorldTag world) const {
  for (const Region& r : regions_) {
    if (address >= r.base && address - r.base < r.size) {
      // Secure world sees everything; normal world only its own regions.
      if (r.world == world || world == WorldTag::kSecure) {
        return AccessResult::kAllowed;
      }
      return AccessResult::kDenied;
    }
  }
  return AccessResult::kDenied;  // unmapped
}

// ---- measurement ------------------------------------------------------------

crypto::Digest measure(const SystemImage& image) {
  wire::Writer w;
  w.var(as_view(image.bitstream.bytes));
  w.var(as_view(image.os_payload));
  return crypto::hash(as_view(w.bytes()));
}

// ---- EmulatedDevice ---------------------------------------------------------

EmulatedDevice::EmulatedDevice(std::uint64_t serial)
    : address_space_(AddressSpace::default_map()) {
  otp_.serial_number = serial;
}

void EmulatedDevice::require_stage(BootStage expected, const char* what) const {
  if (stage_ != expected) {
    throw LifecycleError(std::string(what) + " requires stage " +
                         to_string(expected) + ", device is in " +
                         to_string(stage_));
  }
}

DevicePublicRecord EmulatedDevice::provision(
    ByteView device_secret, const crypto::Digest& boot_key_hash,
    const crypto::Digest& expected_fsbl_digest) {
  if (otp_.locked) throw LifecycleError("OTP already locked");
  if (device_secret.size() != otp_.device_secret.size()) {
    throw ProvisioningError("device secret must be exactly 32 bytes");
  }

  // Provisioning runs the same derivation the FSBL will run at boot, so the
  // published key matches later reports for this bootloader version.
  crypto::SigningKeypair kp =
      crypto::derive_device_keypair(device_secret, expected_fsbl_digest);

  std::copy(device_secret.begin(), device_secret.end(),
            otp_.device_secret.begin());
  otp_.boot_key_hash = boot_key_hash;
  otp_.locked = true;
  provisioned_fsbl_digest_ = expected_fsbl_digest;

  DevicePublicRecord record;
  record.serial_number = otp_.serial_number;
  record.fsbl_digest = expected_fsbl_digest;
  record.device_public_key = kp.public_key;
  crypto::wipe(kp.private_key);
  return record;
}

ByteView EmulatedDevice::otp_device_secret() const {
  if (stage_ != BootStage::kBootRom && stage_ != BootStage::kFsbl) {
    throw AccessDeniedError("device secret is gated to the boot chain");
  }
  return ByteView(otp_.device_secret.data(), otp_.device_secret.size());
}

void EmulatedDevice::fail_secure() {
  stage_ = BootStage::kFailSecure;
  report_.reset();
  session_signing_.reset();
  session_dh_.reset();
  session_ctx_.reset();
  channel_.reset();
  crypto::wipe(boot_scratch_);
  pl_slot_ = BitstreamImage{};
  os_payload_.clear();
}

BootOutcome EmulatedDevice::boot(const wire::FsblImage& fsbl,
                                 const SystemImage& image, RandomSource& rng) {
  if (!otp_.locked) throw LifecycleError("boot requires a provisioned device");
  require_stage(BootStage::kPoweredOff, "boot");

  // Boot ROM: the attached public key must hash to the burned value, and the
  // FSBL body must verify under it, before any FSBL byte takes effect.
  stage_ = BootStage::kBootRom;
  if (crypto::hash(ByteView(fsbl.public_key.bytes)) != otp_.boot_key_hash) {
    fail_secure();
    return {stage_, std::nullopt};
  }
  if (!crypto::verify(fsbl.public_key, as_view(fsbl.code_bytes),
                      fsbl.signature)) {
    fail_secure();
    return {stage_, std::nullopt};
  }

  // FSBL: measure, derive identity, mint session keys, sign the report.
  stage_ = BootStage::kFsbl;
  crypto::Digest fsbl_digest = crypto::hash(as_view(fsbl.code_bytes));
  crypto::Digest program_digest = measure(image);

  // Working RAM for the secret and the derived private key. Zeroed — not
  // freed — before handoff, and included in the application-visible scan
  // surface so a missed wipe shows up in tests.
  boot_scratch_.assign(otp_.device_secret.size() + crypto::kSigningPrivateSize,
                       0);
  ByteView secret = otp_device_secret();
  std::copy(secret.begin(), secret.end(), boot_scratch_.begin());

  crypto::SigningKeypair device_kp = crypto::derive_device_keypair(
      ByteView(boot_scratch_.data(), otp_.device_secret.size()), fsbl_digest);
  std::copy(device_kp.private_key.begin(), device_kp.private_key.end(),
            boot_scratch_.begin() + otp_.device_secret.size());
  device_public_ = device_kp.public_key;

  session_signing_ = crypto::generate_signing_keypair(rng);
  session_dh_ = crypto::generate_dh_keypair(rng);
  wire::SessionPublicKey spk{session_signing_->public_key,
                             session_dh_->public_key};

  report_ = proto::build_report(otp_.serial_number, fsbl_digest, program_digest,
                                spk, device_kp);

  // "Clears the memory that stores the private key": both the local keypair
  // and the scratch copies.
  crypto::wipe(device_kp.private_key);
  crypto::wipe(boot_scratch_);

  pl_slot_ = image.bitstream;
  os_payload_ = image.os_payload;
  measurement_stale_ = false;
  reconfigure_count_ = 0;
  session_ctx_.reset();
  channel_.reset();

  stage_ = BootStage::kSecureOs;
  return {stage_, report_};
}

wire::ChallengeResponse EmulatedDevice::respond(
    const wire::Challenge& challenge) {
  require_stage(BootStage::kSecureOs, "respond");

  wire::ChallengeResponse resp =
      proto::respond(*report_, *session_signing_, challenge);

  // Serving a challenge fixes the session tuple, which is all the device
  // needs to derive its end of the channel.
  proto::SessionContext ctx;
  ctx.serial_number = otp_.serial_number;
  ctx.fsbl_digest = report_->fsbl_digest;
  ctx.program_digest = report_->program_digest;
  ctx.device_public_key = device_public_;
  ctx.session_public_key = report_->session_public_key;
  ctx.verifier_public = challenge.verifier_public;
  session_ctx_ = ctx;
  channel_ = proto::establish_channel(ctx, session_dh_->private_key);

  return resp;
}

Bytes EmulatedDevice::channel_open(ByteView box) const {
  if (!channel_) throw ChannelError("no channel established");
  return channel_->open(box);
}

crypto::SealedBox EmulatedDevice::channel_seal(ByteView plaintext,
                                               RandomSource& rng) const {
  if (!channel_) throw ChannelError("no channel established");
  return channel_->seal(plaintext, rng);
}

AccessResult EmulatedDevice::access(std::uint64_t address, WorldTag world,
                                    AccessKind op) {
  (void)op;  // read and write follow the same world rule
  require_stage(BootStage::kSecureOs, "memory access");
  return address_space_.check(address, world);
}

AccessResult EmulatedDevice::reconfigure_pl(WorldTag world,
                                            const BitstreamImage& bitstream) {
  require_stage(BootStage::kSecureOs, "reconfigure");
  if (world == WorldTag::kNormal) return AccessResult::kDenied;
  if (!pl_slot_.reconfig_enabled) return AccessResult::kDenied;
  pl_slot_ = bitstream;
  measurement_stale_ = true;
  ++reconfigure_count_;
  return AccessResult::kAllowed;
}

void EmulatedDevice::reset() {
  crypto::wipe(boot_scratch_);
  boot_scratch_.clear();
  report_.reset();
  session_signing_.reset();
  session_dh_.reset();
  session_ctx_.reset();
  channel_.reset();
  pl_slot_ = BitstreamImage{};
  os_payload_.clear();
  measurement_stale_ = false;
  reconfigure_count_ = 0;
  stage_ = BootStage::kPoweredOff;
}

Bytes EmulatedDevice::application_visible_bytes() const {
  wire::Writer w;
  w.u64(otp_.serial_number);
  if (report_) {
    w.fixed(as_view(wire::report_body(*report_)));
  }
  w.fixed(as_view(pl_slot_.bytes));
  w.fixed(as_view(to_bytes(pl_slot_.label)));
  w.fixed(as_view(os_payload_));
  w.fixed(as_view(boot_scratch_));
  return w.take();
}

std::optional<crypto::SharedSecret> EmulatedDevice::channel_secret() const {
  if (!channel_) return std::nullopt;
  return channel_->secret();
}

// ---- Manufacturer -----------------------------------------------------------

EmulatedDevice& Manufacturer::manufacture(std::uint64_t serial_number) {
  if (std::find(serials_.begin(), serials_.end(), serial_number) !=
      serials_.end()) {
    throw LifecycleError("serial number already assigned");
  }
  serials_.push_back(serial_number);
  devices_.emplace_back(new EmulatedDevice(serial_number));
  return *devices_.back();
}

Bytes Manufacturer::record_bytes() const {
  wire::Writer w;
  w.u32(static_cast<std::uint32_t>(serials_.size()));
  for (std::uint64_t s : serials_) w.u64(s);
  return w.take();
}

// ---- DeviceEndpoint ---------------------------------------------------------

Bytes DeviceEndpoint::round_trip(ByteView framed_request) {
  std::lock_guard lock(mu_);

  wire::Message request;
  try {
    request = wire::decode(framed_request);
  } catch (const CodecError& e) {
    return wire::encode(wire::ErrorResponse{wire::WireErrorCode::kBadRequest,
                                            e.what()});
  }

  try {
    if (auto* challenge = std::get_if<wire::Challenge>(&request)) {
      return wire::encode(device_.respond(*challenge));
    }
    if (auto* sealed = std::get_if<wire::SealedMessage>(&request)) {
      // Echo service: prove possession of the channel secret by returning
      // the caller's plaintext under a fresh seal.
      Bytes plain = device_.channel_open(as_view(sealed->box));
      return wire::encode(
          wire::SealedMessage{device_.channel_seal(as_view(plain), rng_)});
    }
  } catch (const LifecycleError&) {
    throw TransportError("device not serving requests in its current stage");
  } catch (const ChannelError& e) {
    return wire::encode(
        wire::ErrorResponse{wire::WireErrorCode::kBadRequest, e.what()});
  }
  return wire::encode(wire::ErrorResponse{wire::WireErrorCode::kBadRequest,
                                          "unsupported request"});
}

}  // namespace tedge::device
