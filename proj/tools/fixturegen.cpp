//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Regenerates the committed fixtures/ directory: the bootloader and image
// blobs, one fully provisioned registry snapshot, a golden attestation
// transcript/report from a fixed seed, the matching policy file, the shipped
// attack catalog and a manifest tests use to cross-check decoded values.
// Deterministic: running it twice produces byte-identical files.
//

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "tedge/device.hpp"
#include "tedge/errors.hpp"
#include "tedge/harness.hpp"
#include "tedge/registry.hpp"
#include "tedge/sim.hpp"
#include "tedge/verifier.hpp"

using namespace tedge;

namespace {

void write_file(const std::filesystem::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out.flush()) throw Error("cannot write " + path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, as_view(to_bytes(text)));
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "fixtures";
  std::filesystem::create_directories(dir);

  // Arbitrary distinct blobs: the bootloader, the approved FPGA image and
  // the tampered variant that must fail attestation on digest alone.
  DeterministicRandom fsbl_rng(1001);
  Bytes fsbl_code = fsbl_rng.take(320);
  write_file(dir / "fsbl.bin", as_view(fsbl_code));
  DeterministicRandom plus_rng(1002);
  write_file(dir / "p_plus.bin", as_view(plus_rng.take(512)));
  DeterministicRandom minus_rng(1003);
  write_file(dir / "p_minus.bin", as_view(minus_rng.take(512)));

  // Golden deployment from one fixed seed.
  DeterministicRandom rng(42);
  std::filesystem::remove(dir / "registry.log");
  registry::RegistryService service(dir / "registry.log", rng);
  wire::FsblRelease release = service.release_fsbl(as_view(fsbl_code));
  crypto::Digest fsbl_digest = crypto::hash(as_view(fsbl_code));

  device::Manufacturer factory;
  device::EmulatedDevice& dev = factory.manufacture(1);
  Bytes secret = rng.take(32);
  device::DevicePublicRecord record =
      dev.provision(as_view(secret), service.boot_key_hash(), fsbl_digest);
  service.register_device(1, fsbl_digest, record.device_public_key);

  device::SystemImage image = sim::load_image(dir / "p_plus.bin", {});
  device::BootOutcome boot = dev.boot(release.fsbl, image, rng);
  if (boot.stage != device::BootStage::kSecureOs) {
    std::cerr << "fixture boot failed\n";
    return 1;
  }

  verifier::MeasurementPolicy policy;
  policy.approved_fsbl.insert(fsbl_digest);
  policy.approved_programs.insert(device::measure(image));
  policy.save(dir / "policy.txt");

  registry::LocalRegistry link(service);
  verifier::Verifier user(policy, service.service_key(), rng);
  device::DeviceEndpoint endpoint(dev, rng);
  harness::RecordingInterposer tap(endpoint, &rng);
  verifier::AttestationOutcome outcome = user.attest(tap, link);
  if (!outcome.decision.trusted() || !outcome.report) {
    std::cerr << "fixture attestation failed: "
              << verifier::to_string(outcome.decision) << "\n";
    return 1;
  }

  write_file(dir / "report.bin", as_view(wire::encode(*outcome.report)));
  write_file(dir / "transcript.txt", wire::to_transcript(tap.observed()));
  write_file(dir / "catalog.txt",
             harness::format_catalog(harness::builtin_catalog()));

  nlohmann::json manifest;
  manifest["serial_number"] = outcome.report->serial_number;
  manifest["fsbl_digest"] = to_hex(ByteView(outcome.report->fsbl_digest.bytes));
  manifest["program_digest"] =
      to_hex(ByteView(outcome.report->program_digest.bytes));
  manifest["session_signing_key"] =
      to_hex(ByteView(outcome.report->session_public_key.signing.bytes));
  manifest["session_dh_key"] =
      to_hex(ByteView(outcome.report->session_public_key.dh.bytes));
  manifest["suite_id"] = outcome.report->suite_id;
  manifest["device_signature"] =
      to_hex(ByteView(outcome.report->device_signature.bytes));
  manifest["service_key"] = to_hex(ByteView(service.service_key().bytes));
  manifest["transcript_messages"] = tap.observed().size();
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "fixtures written to " << dir.string() << "\n";
  return 0;
}
