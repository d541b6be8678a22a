//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/device.hpp"

#include <doctest.h>

#include <limits>

#include "ref_sha256.hpp"
#include "tedge/errors.hpp"
#include "tedge/protocol.hpp"
#include "test_fixtures.hpp"

using namespace tedge;
using namespace tedge::device;
using testsupport::BootKit;
using testsupport::make_boot_kit;
using testsupport::make_ready_device;
using testsupport::make_signed_fsbl;

TEST_CASE("measurement covers both payloads with their boundary") {
  SystemImage img;
  img.bitstream.bytes = to_bytes("bitstream-data");
  img.os_payload = to_bytes("os-payload");

  // Independent recomputation: 32-bit big-endian length before each part.
  Bytes expected_input;
  auto put_len = [&expected_input](std::size_t n) {
    for (int shift = 24; shift >= 0; shift -= 8) {
      expected_input.push_back(
          static_cast<std::uint8_t>((n >> shift) & 0xff));
    }
  };
  put_len(img.bitstream.bytes.size());
  expected_input.insert(expected_input.end(), img.bitstream.bytes.begin(),
                        img.bitstream.bytes.end());
  put_len(img.os_payload.size());
  expected_input.insert(expected_input.end(), img.os_payload.begin(),
                        img.os_payload.end());
  CHECK(measure(img).bytes == testsupport::ref_sha256(expected_input));

  SUBCASE("label and capability flag never affect the measurement") {
    SystemImage relabeled = img;
    relabeled.bitstream.label = "something else";
    relabeled.bitstream.reconfig_enabled = true;
    CHECK(measure(relabeled) == measure(img));
  }

  SUBCASE("the two payloads are not interchangeable") {
    SystemImage swapped;
    swapped.bitstream.bytes = img.os_payload;
    swapped.os_payload = img.bitstream.bytes;
    CHECK(measure(swapped) != measure(img));
  }

  SUBCASE("empty payloads are a defined measurement") {
    SystemImage empty;
    Bytes two_zero_prefixes(8, 0);
    CHECK(measure(empty).bytes == testsupport::ref_sha256(two_zero_prefixes));
  }

  SUBCASE("any byte difference changes the measurement") {
    SystemImage tweaked = img;
    tweaked.bitstream.bytes[0] ^= 1;
    CHECK(measure(tweaked) != measure(img));
    SystemImage tweaked_os = img;
    tweaked_os.os_payload.push_back(0);
    CHECK(measure(tweaked_os) != measure(img));
  }
}

TEST_CASE("manufacturing assigns unique serials") {
  Manufacturer factory;
  EmulatedDevice& d1 = factory.manufacture(1);
  CHECK(d1.serial_number() == 1);
  CHECK(d1.stage() == BootStage::kPoweredOff);
  CHECK_FALSE(d1.provisioned());
  CHECK_THROWS_AS(factory.manufacture(1), LifecycleError);
  EmulatedDevice& dmax =
      factory.manufacture(std::numeric_limits<std::uint64_t>::max());
  CHECK(dmax.serial_number() == std::numeric_limits<std::uint64_t>::max());
}

TEST_CASE("provisioning burns the OTP once") {
  DeterministicRandom rng(300);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  EmulatedDevice& dev = factory.manufacture(5);
  Bytes secret = rng.take(32);

  DevicePublicRecord record =
      dev.provision(as_view(secret), kit.boot_key_hash, kit.fsbl_digest);
  CHECK(record.serial_number == 5);
  CHECK(dev.provisioned());

  // The published key must match an independent run of the derivation.
  crypto::SigningKeypair expected =
      crypto::derive_device_keypair(as_view(secret), kit.fsbl_digest);
  CHECK(record.device_public_key == expected.public_key);

  CHECK_THROWS_AS(
      dev.provision(as_view(secret), kit.boot_key_hash, kit.fsbl_digest),
      LifecycleError);

  EmulatedDevice& other = factory.manufacture(6);
  Bytes short_secret = rng.take(8);
  CHECK_THROWS_AS(other.provision(as_view(short_secret), kit.boot_key_hash,
                                  kit.fsbl_digest),
                  ProvisioningError);
}

TEST_CASE("a correctly signed bootloader reaches the secure OS") {
  DeterministicRandom rng(301);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 9, /*do_boot=*/false);

  BootOutcome outcome = ready.dev->boot(kit.fsbl, kit.image, rng);
  REQUIRE(outcome.stage == BootStage::kSecureOs);
  REQUIRE(outcome.report.has_value());

  const wire::AttestationReport& report = *outcome.report;
  CHECK(report.serial_number == 9);
  CHECK(report.fsbl_digest == kit.fsbl_digest);
  CHECK(report.program_digest == measure(kit.image));
  CHECK(report.suite_id == crypto::kSuiteId);
  CHECK(crypto::verify(ready.record.device_public_key,
                       as_view(wire::report_signed_prefix(report)),
                       report.device_signature));
}

TEST_CASE("boot requires provisioning and a power cycle between runs") {
  DeterministicRandom rng(302);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  EmulatedDevice& fresh = factory.manufacture(11);
  CHECK_THROWS_AS(fresh.boot(kit.fsbl, kit.image, rng), LifecycleError);

  auto ready = make_ready_device(factory, kit, rng, 12);
  CHECK_THROWS_AS(ready.dev->boot(kit.fsbl, kit.image, rng), LifecycleError);
  ready.dev->reset();
  CHECK(ready.dev->stage() == BootStage::kPoweredOff);
  CHECK(ready.dev->boot(kit.fsbl, kit.image, rng).stage ==
        BootStage::kSecureOs);
}

TEST_CASE("repeated boots keep identity and measurements, rotate session keys") {
  DeterministicRandom rng(303);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 13, /*do_boot=*/false);

  wire::AttestationReport first = *ready.dev->boot(kit.fsbl, kit.image, rng).report;
  ready.dev->reset();
  wire::AttestationReport second =
      *ready.dev->boot(kit.fsbl, kit.image, rng).report;

  CHECK(first.serial_number == second.serial_number);
  CHECK(first.fsbl_digest == second.fsbl_digest);
  CHECK(first.program_digest == second.program_digest);
  CHECK(first.session_public_key != second.session_public_key);
}

TEST_CASE("boot ROM refuses bad bootloaders and fails secure") {
  DeterministicRandom rng(304);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;

  SUBCASE("public key does not match the burned hash") {
    auto ready = make_ready_device(factory, kit, rng, 20, /*do_boot=*/false);
    crypto::SigningKeypair rogue = crypto::generate_signing_keypair(rng);
    wire::FsblImage forged = make_signed_fsbl(kit.fsbl.code_bytes, rogue);
    BootOutcome outcome = ready.dev->boot(forged, kit.image, rng);
    CHECK(outcome.stage == BootStage::kFailSecure);
    CHECK_FALSE(outcome.report.has_value());
    CHECK_FALSE(ready.dev->report().has_value());
  }

  SUBCASE("signature does not cover the code") {
    auto ready = make_ready_device(factory, kit, rng, 21, /*do_boot=*/false);
    wire::FsblImage tampered = kit.fsbl;
    tampered.code_bytes[0] ^= 1;
    BootOutcome outcome = ready.dev->boot(tampered, kit.image, rng);
    CHECK(outcome.stage == BootStage::kFailSecure);
    CHECK_FALSE(outcome.report.has_value());
  }

  SUBCASE("truncated bootloader image") {
    auto ready = make_ready_device(factory, kit, rng, 22, /*do_boot=*/false);
    wire::FsblImage truncated = kit.fsbl;
    truncated.code_bytes.pop_back();
    BootOutcome outcome = ready.dev->boot(truncated, kit.image, rng);
    CHECK(outcome.stage == BootStage::kFailSecure);
    CHECK_FALSE(outcome.report.has_value());
  }
}

TEST_CASE("fail-secure is absorbing until a reset") {
  DeterministicRandom rng(305);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 30, /*do_boot=*/false);

  wire::FsblImage tampered = kit.fsbl;
  tampered.code_bytes[3] ^= 0xff;
  REQUIRE(ready.dev->boot(tampered, kit.image, rng).stage ==
          BootStage::kFailSecure);

  wire::Challenge challenge{};
  CHECK_THROWS_AS(ready.dev->respond(challenge), LifecycleError);
  CHECK_THROWS_AS(ready.dev->access(0x1000, WorldTag::kNormal,
                                    AccessKind::kRead),
                  LifecycleError);
  CHECK_THROWS_AS(ready.dev->reconfigure_pl(WorldTag::kSecure, {}),
                  LifecycleError);
  CHECK_THROWS_AS(ready.dev->boot(kit.fsbl, kit.image, rng), LifecycleError);

  ready.dev->reset();
  CHECK(ready.dev->boot(kit.fsbl, kit.image, rng).stage ==
        BootStage::kSecureOs);
}

TEST_CASE("the OTP secret is unreadable outside the boot chain") {
  DeterministicRandom rng(306);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 40, /*do_boot=*/false);

  CHECK_THROWS_AS(ready.dev->otp_device_secret(), AccessDeniedError);
  ready.dev->boot(kit.fsbl, kit.image, rng);
  CHECK_THROWS_AS(ready.dev->otp_device_secret(), AccessDeniedError);
  ready.dev->reset();
  CHECK_THROWS_AS(ready.dev->otp_device_secret(), AccessDeniedError);
}

TEST_CASE("no secret material is visible to applications after boot") {
  DeterministicRandom rng(307);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 41);

  // Recompute the material that must not appear.
  crypto::SigningKeypair device_kp =
      crypto::derive_device_keypair(as_view(ready.secret), kit.fsbl_digest);

  Bytes visible = ready.dev->application_visible_bytes();
  CHECK_FALSE(visible.empty());
  CHECK_FALSE(contains(as_view(visible), as_view(ready.secret)));
  CHECK_FALSE(contains(as_view(visible),
                       ByteView(device_kp.private_key.data(),
                                device_kp.private_key.size())));
  // The private key's seed half alone is enough to reconstruct it.
  CHECK_FALSE(contains(as_view(visible),
                       ByteView(device_kp.private_key.data(), 32)));
  // Known-present bytes prove the scan surface is real: the report inside it
  // carries the session public key.
  REQUIRE(ready.dev->report().has_value());
  CHECK(contains(
      as_view(visible),
      ByteView(ready.dev->report()->session_public_key.signing.bytes)));
}

TEST_CASE("world partition gates memory accesses") {
  DeterministicRandom rng(308);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 50);
  EmulatedDevice& dev = *ready.dev;

  // Normal world reaches its RAM but no PL or configuration resource.
  CHECK(dev.access(0x0000'1000, WorldTag::kNormal, AccessKind::kRead) ==
        AccessResult::kAllowed);
  CHECK(dev.access(0x4000'0000, WorldTag::kNormal, AccessKind::kRead) ==
        AccessResult::kDenied);
  CHECK(dev.access(0xf807'2004, WorldTag::kNormal, AccessKind::kWrite) ==
        AccessResult::kDenied);
  CHECK(dev.access(0xfffc'0010, WorldTag::kNormal, AccessKind::kRead) ==
        AccessResult::kDenied);

  // Secure world reaches everything mapped.
  CHECK(dev.access(0x4000'0000, WorldTag::kSecure, AccessKind::kWrite) ==
        AccessResult::kAllowed);
  CHECK(dev.access(0x0000'1000, WorldTag::kSecure, AccessKind::kRead) ==
        AccessResult::kAllowed);
  CHECK(dev.access(0xf807'2004, WorldTag::kSecure, AccessKind::kWrite) ==
        AccessResult::kAllowed);

  // Unmapped addresses are denied for both worlds.
  CHECK(dev.access(0xc000'0000, WorldTag::kNormal, AccessKind::kRead) ==
        AccessResult::kDenied);
  CHECK(dev.access(0xc000'0000, WorldTag::kSecure, AccessKind::kRead) ==
        AccessResult::kDenied);
}

TEST_CASE("address regions never overlap and construction rejects overlap") {
  AddressSpace map = AddressSpace::default_map();
  const auto& regions = map.regions();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      bool disjoint = regions[i].base + regions[i].size <= regions[j].base ||
                      regions[j].base + regions[j].size <= regions[i].base;
      CHECK(disjoint);
    }
  }
  for (const Region& r : regions) {
    if (r.kind != RegionKind::kRam) CHECK(r.world == WorldTag::kSecure);
  }
  CHECK_THROWS_AS(AddressSpace({{0, 16, WorldTag::kNormal, RegionKind::kRam},
                                {8, 16, WorldTag::kNormal, RegionKind::kRam}}),
                  Error);
}

TEST_CASE("reconfiguration is secure-world and capability gated") {
  DeterministicRandom rng(309);
  Manufacturer factory;

  BitstreamImage replacement{to_bytes("new design"), "v2", false};

  SUBCASE("capability disabled by the loaded design") {
    BootKit locked = make_boot_kit(rng, /*reconfig_enabled=*/false);
    auto ready = make_ready_device(factory, locked, rng, 60);
    CHECK(ready.dev->reconfigure_pl(WorldTag::kSecure, replacement) ==
          AccessResult::kDenied);
    CHECK(ready.dev->reconfigure_count() == 0);
    CHECK_FALSE(ready.dev->measurement_stale());
  }

  SUBCASE("normal world can never reconfigure") {
    BootKit open = make_boot_kit(rng, /*reconfig_enabled=*/true);
    auto ready = make_ready_device(factory, open, rng, 61);
    CHECK(ready.dev->reconfigure_pl(WorldTag::kNormal, replacement) ==
          AccessResult::kDenied);
    CHECK_FALSE(ready.dev->measurement_stale());
  }

  SUBCASE("secure world with capability replaces the design and flags it") {
    BootKit open = make_boot_kit(rng, /*reconfig_enabled=*/true);
    auto ready = make_ready_device(factory, open, rng, 62);
    CHECK(ready.dev->reconfigure_pl(WorldTag::kSecure, replacement) ==
          AccessResult::kAllowed);
    CHECK(ready.dev->measurement_stale());
    CHECK(ready.dev->reconfigure_count() == 1);
    // The report still stands; only the staleness marker changes.
    CHECK(ready.dev->report().has_value());
    // The new design disabled the port, so a second swap is refused.
    CHECK(ready.dev->reconfigure_pl(WorldTag::kSecure, replacement) ==
          AccessResult::kDenied);
  }
}

TEST_CASE("device answers challenges and derives the shared channel") {
  DeterministicRandom rng(310);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 70);

  crypto::DhKeypair verifier_dh = crypto::generate_dh_keypair(rng);
  wire::Challenge challenge =
      proto::make_challenge(verifier_dh.public_key, rng);
  wire::ChallengeResponse resp = ready.dev->respond(challenge);

  proto::NonceRegistry nonces;
  proto::VerifyOutcome out = proto::verify_response(
      resp, challenge, ready.record.device_public_key, nonces);
  REQUIRE(out.accepted());

  proto::SecureChannel verifier_end =
      proto::establish_channel(*out.context, verifier_dh.private_key);
  REQUIRE(ready.dev->channel_secret().has_value());
  CHECK(verifier_end.secret() == *ready.dev->channel_secret());

  Bytes msg = to_bytes("over the wire");
  Bytes opened =
      ready.dev->channel_open(as_view(verifier_end.seal(as_view(msg), rng)));
  CHECK(opened == msg);
  CHECK(verifier_end.open(as_view(ready.dev->channel_seal(as_view(msg), rng))) ==
        msg);
}

TEST_CASE("device endpoint speaks framed messages") {
  DeterministicRandom rng(311);
  BootKit kit = make_boot_kit(rng);
  Manufacturer factory;
  auto ready = make_ready_device(factory, kit, rng, 80);
  DeviceEndpoint endpoint(*ready.dev, rng);

  crypto::DhKeypair verifier_dh = crypto::generate_dh_keypair(rng);
  wire::Challenge challenge =
      proto::make_challenge(verifier_dh.public_key, rng);

  Bytes reply = endpoint.round_trip(as_view(wire::encode(challenge)));
  wire::Message decoded = wire::decode(as_view(reply));
  REQUIRE(std::holds_alternative<wire::ChallengeResponse>(decoded));

  proto::NonceRegistry nonces;
  proto::VerifyOutcome out = proto::verify_response(
      std::get<wire::ChallengeResponse>(decoded), challenge,
      ready.record.device_public_key, nonces);
  REQUIRE(out.accepted());

  // Sealed echo over the established channel.
  proto::SecureChannel channel =
      proto::establish_channel(*out.context, verifier_dh.private_key);
  Bytes msg = to_bytes("echo me");
  Bytes sealed_reply = endpoint.round_trip(as_view(
      wire::encode(wire::SealedMessage{channel.seal(as_view(msg), rng)})));
  auto echoed = std::get<wire::SealedMessage>(wire::decode(as_view(sealed_reply)));
  CHECK(channel.open(as_view(echoed.box)) == msg);

  // Undecodable bytes produce a protocol-level error, not a crash.
  Bytes junk = rng.take(10);
  wire::Message err = wire::decode(as_view(endpoint.round_trip(as_view(junk))));
  CHECK(std::holds_alternative<wire::ErrorResponse>(err));

  // A powered-off device is simply unreachable.
  ready.dev->reset();
  CHECK_THROWS_AS(endpoint.round_trip(as_view(wire::encode(challenge))),
                  TransportError);
}
