//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include "tedge/crypto.hpp"
#include "tedge/protocol.hpp"
#include "tedge/rng.hpp"

namespace tedge::verifier {

/// The verifier's prior knowledge: digests of bootloaders and application
/// images it is willing to trust. Both sets must be non-empty before any
/// trust decision is made.
struct MeasurementPolicy {
  std::set<crypto::Digest> approved_fsbl;
  std::set<crypto::Digest> approved_programs;

  bool empty() const { return approved_fsbl.empty() || approved_programs.empty(); }

  /// Parses a policy file: one lowercase hex digest per line under `[fsbl]`
  /// or `[programs]` section headers. Blank lines and `#` comments are
  /// ignored. Throws Error on malformed lines or digests outside a section.
  static MeasurementPolicy load(const std::filesystem::path& path);

  /// Writes the policy in the same format `load` accepts.
  void save(const std::filesystem::path& path) const;
};

enum class Verdict : std::uint8_t { kTrusted, kUntrusted };

enum class TrustReason : std::uint8_t {
  kOk,
  kUnknownFsbl,
  kUnknownProgram,
  kRevokedFsbl,
  kRevokedDevice,
  kProtocolReject,
};

/// Outcome of one attestation run. `verdict == kTrusted` iff
/// `reason == kOk`; `protocol_reason` is set iff `reason == kProtocolReject`.
struct TrustDecision {
  Verdict verdict = Verdict::kUntrusted;
  TrustReason reason = TrustReason::kProtocolReject;
  std::optional<proto::RejectReason> protocol_reason;

  bool trusted() const { return verdict == Verdict::kTrusted; }

  static TrustDecision ok();
  static TrustDecision untrusted(TrustReason reason);
  static TrustDecision reject(proto::RejectReason reason);

  auto operator<=>(const TrustDecision&) const = default;
};

/// Human-readable rendering, e.g. "Trusted(Ok)" or
/// "Untrusted(ProtocolReject:ReplayDetected)".
std::string to_string(const TrustDecision& decision);
std::string to_string(TrustReason reason);

/// Result of a device-key fetch from the registry.
enum class KeyStatus : std::uint8_t { kOk, kNotFound, kRevoked };

struct DeviceKey {
  KeyStatus status = KeyStatus::kNotFound;
  crypto::VerifyingKey key{};
};

/// Looks up the verifying key registered for (serial, fsbl digest).
DeviceKey fetch_device_key(proto::Transport& registry,
                           std::uint64_t serial_number,
                           const crypto::Digest& fsbl_digest);

/// Everything a caller may want from one attestation run. The channel is
/// present exactly when the decision is Trusted; the context and report are
/// present whenever the protocol-level exchange itself succeeded (they feed
/// diagnostics for measurement/revocation verdicts).
struct AttestationOutcome {
  TrustDecision decision;
  std::optional<wire::AttestationReport> report;
  std::optional<proto::SessionContext> context;
  std::optional<proto::SecureChannel> channel;
};

/// The remote user: holds the measurement policy, the registry service key
/// pinned out of band, and the replay ledger shared across its sessions.
class Verifier {
 public:
  Verifier(MeasurementPolicy policy, crypto::VerifyingKey registry_service_key,
           RandomSource& rng);

  /// Runs one full challenge-response exchange against `device`, consulting
  /// `registry` for a fresh revocation list and the device's key. Never
  /// throws for device or registry misbehaviour — those become Untrusted
  /// decisions; only an empty policy throws.
  AttestationOutcome attest(proto::Transport& device,
                            proto::Transport& registry);

  const MeasurementPolicy& policy() const { return policy_; }
  proto::NonceRegistry& nonces() { return nonces_; }

 private:
  MeasurementPolicy policy_;
  crypto::VerifyingKey service_key_;
  RandomSource& rng_;
  proto::NonceRegistry nonces_;
};

}  // namespace tedge::verifier
