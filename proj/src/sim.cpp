//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/sim.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <memory>

#include "tedge/device.hpp"
#include "tedge/errors.hpp"
#include "tedge/registry.hpp"

namespace tedge::sim {

using nlohmann::json;

namespace {

std::string hex_of(const crypto::Digest& d) { return to_hex(ByteView(d.bytes)); }
std::string hex_of(const crypto::VerifyingKey& k) {
  return to_hex(ByteView(k.bytes));
}

std::filesystem::path scratch_log_path() {
  static std::atomic<std::uint64_t> counter{0};
  auto dir = std::filesystem::temp_directory_path() / "tedge-cli";
  std::filesystem::create_directories(dir);
  return dir / ("registry-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++) + ".log");
}

}  // namespace

void EventLog::emit(const std::string& stage, const std::string& actor,
                    const std::string& event, const json& payload) {
  json line;
  line["actor"] = actor;
  line["event"] = event;
  line["payload"] = payload;
  line["stage"] = stage;
  lines_.push_back(line.dump());
}

void EventLog::write(std::ostream& out) const {
  for (const std::string& line : lines_) out << line << "\n";
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in),
               std::istreambuf_iterator<char>());
}

const Bytes& builtin_os_payload() {
  static const Bytes payload = to_bytes("tedge secure-os payload v1");
  return payload;
}

device::SystemImage load_image(const std::filesystem::path& image_path,
                               const std::filesystem::path& os_payload_path) {
  device::SystemImage image;
  image.bitstream.bytes = read_file(image_path);
  image.bitstream.label = image_path.stem().string();
  image.bitstream.reconfig_enabled = false;
  image.os_payload = os_payload_path.empty() ? builtin_os_payload()
                                             : read_file(os_payload_path);
  return image;
}

LifecycleResult run_lifecycle(const SimulationConfig& config) {
  LifecycleResult result;
  DeterministicRandom rng(config.seed);

  Bytes fsbl_code = read_file(config.fsbl_path);
  crypto::Digest fsbl_digest = crypto::hash(as_view(fsbl_code));
  device::SystemImage image =
      load_image(config.image_path, config.os_payload_path);

  // The registry: embedded for self-contained runs, or a live endpoint.
  std::unique_ptr<registry::RegistryService> local_service;
  std::unique_ptr<registry::LocalRegistry> local_link;
  std::unique_ptr<registry::RegistryClient> remote;
  proto::Transport* reg = nullptr;
  if (config.registry_address.empty()) {
    auto log_path = scratch_log_path();
    std::filesystem::remove(log_path);
    local_service =
        std::make_unique<registry::RegistryService>(log_path, rng);
    local_link = std::make_unique<registry::LocalRegistry>(*local_service);
    reg = local_link.get();
    result.log.emit("setup", "registry", "started",
                    {{"mode", "in-process"}});
  } else {
    remote = std::make_unique<registry::RegistryClient>(
        config.registry_address);
    reg = remote.get();
    result.log.emit("setup", "registry", "connected", {{"mode", "remote"}});
  }
  registry::RegistryView view(*reg);

  crypto::VerifyingKey service_key = view.service_key();
  result.log.emit("setup", "verifier", "service-key-pinned",
                  {{"service_key", hex_of(service_key)}});

  wire::FsblRelease release = view.release_fsbl(as_view(fsbl_code));
  result.log.emit("release", "registry", "fsbl-released",
                  {{"fsbl_digest", hex_of(fsbl_digest)},
                   {"version", release.version}});

  verifier::MeasurementPolicy policy;
  if (config.policy_path.empty()) {
    policy.approved_fsbl.insert(fsbl_digest);
    policy.approved_programs.insert(device::measure(image));
  } else {
    policy = verifier::MeasurementPolicy::load(config.policy_path);
  }
  verifier::Verifier user(policy, service_key, rng);

  device::Manufacturer factory;
  crypto::Digest boot_key_hash = crypto::hash(ByteView(service_key.bytes));

  for (std::size_t i = 0; i < config.device_count; ++i) {
    std::uint64_t serial = i + 1;
    device::EmulatedDevice& dev = factory.manufacture(serial);
    result.log.emit("manufacture", "manufacturer", "device-manufactured",
                    {{"serial", serial}});

    Bytes secret = rng.take(32);
    device::DevicePublicRecord record =
        dev.provision(as_view(secret), boot_key_hash, fsbl_digest);
    crypto::wipe(secret);
    result.log.emit("provision", "device", "provisioned",
                    {{"fsbl_digest", hex_of(record.fsbl_digest)},
                     {"serial", serial}});
    view.register_device(record.serial_number, record.fsbl_digest,
                         record.device_public_key);
    result.log.emit("provision", "registry", "device-registered",
                    {{"device_key", hex_of(record.device_public_key)},
                     {"serial", serial}});

    device::BootOutcome boot = dev.boot(release.fsbl, image, rng);
    json boot_payload = {{"serial", serial},
                         {"stage", device::to_string(boot.stage)}};
    if (boot.report) {
      boot_payload["program_digest"] = hex_of(boot.report->program_digest);
    }
    result.log.emit("boot", "device", "booted", boot_payload);
    if (boot.stage != device::BootStage::kSecureOs) {
      result.log.emit("attest", "verifier", "skipped",
                      {{"reason", "device not serving"}, {"serial", serial}});
      continue;
    }

    device::DeviceEndpoint endpoint(dev, rng);
    verifier::AttestationOutcome outcome = user.attest(endpoint, *reg);
    result.decisions.push_back(outcome.decision);
    result.log.emit(
        "attest", "verifier", "attested",
        {{"decision", verifier::to_string(outcome.decision)},
         {"serial", serial},
         {"verdict", outcome.decision.trusted() ? "Trusted" : "Untrusted"}});

    if (outcome.channel) {
      Bytes probe = to_bytes("lifecycle channel probe");
      crypto::SealedBox box = outcome.channel->seal(as_view(probe), rng);
      bool echoed = dev.channel_open(as_view(box)) == probe;
      result.log.emit("attest", "channel", "sealed-roundtrip",
                      {{"ok", echoed}, {"serial", serial}});
    }
  }

  result.all_trusted =
      result.decisions.size() == config.device_count &&
      std::all_of(result.decisions.begin(), result.decisions.end(),
                  [](const verifier::TrustDecision& d) { return d.trusted(); });
  result.log.emit("done", "cli", "lifecycle-complete",
                  {{"all_trusted", result.all_trusted},
                   {"devices", config.device_count}});
  return result;
}

AttackResult run_attack(const SimulationConfig& config,
                        const std::string& scenario_or_all,
                        const std::filesystem::path& catalog_path) {
  AttackResult result;
  std::vector<harness::AttackScenario> catalog =
      catalog_path.empty() ? harness::builtin_catalog()
                           : harness::load_catalog(catalog_path);

  std::vector<harness::AttackScenario> chosen;
  if (scenario_or_all == "all") {
    chosen = catalog;
  } else {
    for (const auto& s : catalog) {
      if (s.name == scenario_or_all) chosen.push_back(s);
    }
    if (chosen.empty()) {
      throw HarnessError("unknown scenario: " + scenario_or_all);
    }
  }

  int passed = 0;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    harness::World world(config.seed + i);
    harness::ScenarioReport report = harness::run_scenario(world, chosen[i]);
    result.reports.push_back(report);
    if (report.passed) ++passed;
    result.log.emit("attack", "harness", "scenario",
                    {{"expected", report.expected},
                     {"name", report.name},
                     {"observed", report.observed},
                     {"passed", report.passed},
                     {"threat", harness::to_string(report.threat_ref)}});
  }
  result.all_passed = passed == static_cast<int>(chosen.size());
  result.log.emit("attack", "harness", "summary",
                  {{"failed", static_cast<int>(chosen.size()) - passed},
                   {"passed", passed}});
  return result;
}

std::string inspect_report(const std::filesystem::path& report_path,
                           const std::filesystem::path& registry_log) {
  Bytes framed = read_file(report_path);
  wire::Message message = wire::decode(as_view(framed));
  auto* report = std::get_if<wire::AttestationReport>(&message);
  if (report == nullptr) {
    throw CodecError("file does not contain an attestation report");
  }

  json out;
  out["serial_number"] = report->serial_number;
  out["fsbl_digest"] = hex_of(report->fsbl_digest);
  out["program_digest"] = hex_of(report->program_digest);
  out["session_signing_key"] = hex_of(report->session_public_key.signing);
  out["session_dh_key"] =
      to_hex(ByteView(report->session_public_key.dh.bytes));
  out["suite_id"] = report->suite_id;
  out["device_signature"] = to_hex(ByteView(report->device_signature.bytes));

  if (!registry_log.empty()) {
    if (!std::filesystem::exists(registry_log)) {
      throw Error("registry snapshot not found: " + registry_log.string());
    }
    DeterministicRandom unused(0);
    registry::RegistryService snapshot(registry_log, unused);
    auto record =
        snapshot.lookup(report->serial_number, report->fsbl_digest);
    if (!record) {
      out["signature"] = "unknown-device";
    } else if (crypto::verify(record->device_public_key,
                              as_view(wire::report_signed_prefix(*report)),
                              report->device_signature)) {
      out["signature"] = "valid";
    } else {
      out["signature"] = "invalid";
    }
  }
  return out.dump(2) + "\n";
}

}  // namespace tedge::sim
