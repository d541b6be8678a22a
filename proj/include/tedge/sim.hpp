//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Orchestration behind the command-line front end: assemble a deployment
// from fixture files, run the lifecycle (manufacture → provision → boot →
// attest), run attack scenarios, and inspect report files. Every run emits a
// JSON-lines event log with a stable schema (actor, event, payload, stage)
// and no timestamps, so fixed-seed runs are byte-identical.
//

#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tedge/harness.hpp"
#include "tedge/verifier.hpp"

namespace tedge::sim {

struct SimulationConfig {
  std::uint64_t seed = 42;
  std::size_t device_count = 1;
  /// Empty: run an in-process registry. Otherwise "host:port" of a live one.
  std::string registry_address;
  std::filesystem::path fsbl_path;
  std::filesystem::path image_path;
  /// Empty: synthesize a policy approving exactly the booted configuration.
  std::filesystem::path policy_path;
  /// Empty: use the built-in secure-OS payload constant.
  std::filesystem::path os_payload_path;
};

/// Ordered JSON-lines event log. Keys inside each line are alphabetical
/// (nlohmann::json's object order), so logs diff cleanly.
class EventLog {
 public:
  void emit(const std::string& stage, const std::string& actor,
            const std::string& event, const nlohmann::json& payload);
  const std::vector<std::string>& lines() const { return lines_; }
  void write(std::ostream& out) const;

 private:
  std::vector<std::string> lines_;
};

/// Reads a whole file; throws Error naming the path when unreadable.
Bytes read_file(const std::filesystem::path& path);

/// The secure-OS payload booted when no file overrides it. A constant keeps
/// seeded runs deterministic without adding another required fixture.
const Bytes& builtin_os_payload();

/// Builds the system image the CLI boots: the file's bytes are the FPGA
/// configuration, the payload comes from `os_payload_path` or the built-in
/// constant.
device::SystemImage load_image(const std::filesystem::path& image_path,
                               const std::filesystem::path& os_payload_path);

struct LifecycleResult {
  bool all_trusted = false;
  std::vector<verifier::TrustDecision> decisions;
  EventLog log;
};

/// The full deployment story for config.device_count devices. Throws Error
/// for operational failures (missing fixtures, unreachable registry);
/// untrusted verdicts are results, not errors.
LifecycleResult run_lifecycle(const SimulationConfig& config);

struct AttackResult {
  bool all_passed = false;
  std::vector<harness::ScenarioReport> reports;
  EventLog log;
};

/// Runs one named scenario or "all" against fresh seeded worlds. An empty
/// catalog path selects the built-in catalog. Unknown names throw
/// HarnessError.
AttackResult run_attack(const SimulationConfig& config,
                        const std::string& scenario_or_all,
                        const std::filesystem::path& catalog_path = {});

/// Decodes a framed attestation report file into pretty-printed JSON. With a
/// registry log snapshot, also verifies the device signature against the
/// registered key ("valid" / "invalid" / "unknown-device"). Throws
/// CodecError/Error on undecodable input — the CLI maps that to exit 2.
std::string inspect_report(const std::filesystem::path& report_path,
                           const std::filesystem::path& registry_log = {});

}  // namespace tedge::sim
