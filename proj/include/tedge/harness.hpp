//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// The adversary harness: a programmable man-in-the-middle that records,
// drops, replays, mutates and injects protocol frames, plus lifecycle
// attackers (fake devices, key scans, privacy scans) bundled into a
// self-checking scenario catalog. Each scenario carries its expected verdict,
// so running the catalog is itself an assertion about the system.
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tedge/device.hpp"
#include "tedge/protocol.hpp"
#include "tedge/registry.hpp"
#include "tedge/rng.hpp"
#include "tedge/verifier.hpp"

namespace tedge::harness {

// ---- Interposition ----------------------------------------------------------

enum class Action : std::uint8_t {
  kPassthrough,
  kDrop,
  kReplay,
  kModify,
  kInject,
};

/// One scripted act on one observed message. Scripts are ordered: entry i of
/// a script applies to the i-th message crossing the interposer (requests and
/// replies both count; the first challenge is message 0, its response 1, …).
struct Interposition {
  Action action = Action::kPassthrough;
  /// kReplay: index of a previously observed message to substitute.
  std::size_t replay_index = 0;
  /// kModify: dotted field path within the decoded message.
  std::string field_path;
  /// kModify: replacement field bytes (empty = fresh random bytes that differ
  /// from the original). kInject: the complete framed message to substitute.
  Bytes bytes;
};

Interposition passthrough();
Interposition drop();
Interposition replay(std::size_t recorded_index);
Interposition modify(std::string field_path, Bytes bytes = {});
Interposition inject(Bytes framed);

/// Transport wrapper that records every frame it carries (originals, before
/// tampering) and applies the script step for each message position. Dropped
/// messages surface to the caller as TransportError, exactly like a lost
/// datagram. Replay of a not-yet-observed index throws HarnessError.
class RecordingInterposer : public proto::Transport {
 public:
  explicit RecordingInterposer(proto::Transport& inner,
                               RandomSource* rng = nullptr)
      : inner_(inner), rng_(rng) {}

  void set_script(std::vector<Interposition> script);
  /// Extends/overwrites the script at one message position.
  void script_at(std::size_t message_index, Interposition step);

  Bytes round_trip(ByteView framed_request) override;

  /// Every message observed so far, in crossing order.
  const std::vector<Bytes>& observed() const { return observed_; }

 private:
  Bytes apply(std::size_t index, const Bytes& original);

  proto::Transport& inner_;
  RandomSource* rng_;
  std::vector<Interposition> script_;
  std::vector<Bytes> observed_;
  std::size_t next_index_ = 0;
};

// ---- Structural field mutation ----------------------------------------------

struct FieldSpec {
  std::string path;
  std::size_t size = 0;
};

/// The mutable field paths of a decoded message ("verifier_public" on a
/// challenge; "report.program_digest", "session_signature", … on a
/// response). Empty for message types the mutator does not cover.
std::vector<FieldSpec> field_paths(const wire::Message& message);

/// Decode, overwrite the named field with `replacement`, re-encode. The
/// result is always canonically framed. Throws HarnessError on unknown
/// paths or wrong replacement size.
Bytes mutate_field(ByteView framed, const std::string& field_path,
                   ByteView replacement);

/// mutate_field over a recorded transcript: every frame containing the field
/// is rewritten; throws HarnessError if no frame had it.
std::vector<Bytes> record_and_mutate(const std::vector<Bytes>& transcript,
                                     const std::string& field_path,
                                     ByteView replacement);

// ---- The assembled world ----------------------------------------------------

/// A complete, freshly provisioned deployment: in-process registry, a
/// manufacturer, one device booted with the approved program, and a verifier
/// whose policy approves exactly that configuration. Everything is derived
/// from one seed, so two worlds with equal seeds behave identically.
class World {
 public:
  explicit World(std::uint64_t seed);
  World(std::uint64_t seed, const std::filesystem::path& registry_log);

  World(const World&) = delete;
  World& operator=(const World&) = delete;

  struct Station {
    device::EmulatedDevice* dev = nullptr;
    std::unique_ptr<device::DeviceEndpoint> endpoint;
    /// Provisioning inputs retained only so leak scans know the needle bytes;
    /// a real operator would destroy these.
    Bytes provisioning_secret;
  };

  /// Manufacture + provision + register + boot one more device. The registry
  /// binding can be overridden with a foreign key to model provisioning
  /// compromise. Throws if the boot chain does not reach the secure OS.
  Station& spawn_device(const device::SystemImage& image,
                        std::optional<crypto::VerifyingKey> registry_key_override =
                            std::nullopt);

  /// The device created at construction, booted with the approved image.
  Station& primary() { return stations_.front(); }
  std::vector<Station>& stations() { return stations_; }

  /// One verifier session against `device` (defaults to the primary
  /// endpoint), optionally through an interposer.
  verifier::AttestationOutcome attest(proto::Transport& device);
  verifier::AttestationOutcome attest_primary();

  DeterministicRandom& rng() { return rng_; }
  registry::RegistryService& registry_service() { return *registry_; }
  registry::LocalRegistry& registry_link() { return *registry_link_; }
  device::Manufacturer& factory() { return factory_; }
  verifier::Verifier& user() { return *user_; }

  const wire::FsblRelease& fsbl_release() const { return fsbl_release_; }
  const crypto::Digest& fsbl_digest() const { return fsbl_digest_; }
  const device::SystemImage& good_image() const { return good_image_; }
  const device::SystemImage& rogue_image() const { return rogue_image_; }
  const crypto::Digest& good_program_digest() const {
    return good_program_digest_;
  }

 private:
  DeterministicRandom rng_;
  device::Manufacturer factory_;
  std::unique_ptr<registry::RegistryService> registry_;
  std::unique_ptr<registry::LocalRegistry> registry_link_;
  wire::FsblRelease fsbl_release_;
  crypto::Digest fsbl_digest_;
  device::SystemImage good_image_;
  device::SystemImage rogue_image_;
  crypto::Digest good_program_digest_;
  std::unique_ptr<verifier::Verifier> user_;
  std::vector<Station> stations_;
  std::uint64_t next_serial_ = 1;
};

// ---- Scenarios ---------------------------------------------------------------

enum class ThreatRef : std::uint8_t {
  kT1ManuPrivacy,
  kT2ProvPrivacy,
  kT3WrongApp,
  kT4OutsideTee,
  kT5Mitm,
  kT6MaliciousDev,
};

const char* to_string(ThreatRef threat);
std::optional<ThreatRef> parse_threat(std::string_view text);

/// How a scenario drives the world. Script-based modes interpose on the
/// verifier↔device link; the others stage dedicated actors or scans.
enum class ScenarioMode : std::uint8_t {
  kControl,              // passthrough script, expect Trusted
  kMitm,                 // apply the script to one session
  kReplaySession,        // record a legit session, replay its response later
  kOutsideTee,           // protocol-faithful attacker with no provisioned key
  kWrongDevice,          // registry binding points at a foreign key
  kWrongProgram,         // device boots the unapproved image
  kKeyScan,              // byte-scan visible state for secret material
  kManufacturerPrivacy,  // manufacturer record must not identify F/P
  kRegistryPrivacy,      // audit log must hold (serial, fsbl digest) only
};

const char* to_string(ScenarioMode mode);
std::optional<ScenarioMode> parse_mode(std::string_view text);

struct Expectation {
  enum class Kind : std::uint8_t {
    kTrusted,
    kUntrusted,   // a specific measurement/revocation reason
    kReject,      // any of the listed protocol reject reasons
    kCleanScan,   // scan found nothing and the control flow stayed Trusted
  };
  Kind kind = Kind::kTrusted;
  verifier::TrustReason reason = verifier::TrustReason::kOk;
  std::vector<proto::RejectReason> any_of;
};

bool matches(const Expectation& expected,
             const verifier::TrustDecision& decision);
std::string to_string(const Expectation& expected);

struct AttackScenario {
  std::string name;
  ThreatRef threat_ref = ThreatRef::kT5Mitm;
  ScenarioMode mode = ScenarioMode::kControl;
  std::vector<Interposition> script;  // entry i applies to message i
  Expectation expect;
};

struct ScenarioReport {
  std::string name;
  ThreatRef threat_ref = ThreatRef::kT5Mitm;
  bool passed = false;
  std::string expected;
  std::string observed;
};

/// Executes one scenario inside `world` and grades it against its own
/// expectation. Scenarios may extend the world (spawn extra devices).
ScenarioReport run_scenario(World& world, const AttackScenario& scenario);

/// The shipped catalog: at least one scenario per threat T1–T6. Always
/// passes validate_catalog.
std::vector<AttackScenario> builtin_catalog();

/// Throws HarnessError unless every ThreatRef is covered and every script
/// step parses.
void validate_catalog(const std::vector<AttackScenario>& catalog);

/// Round-trippable text form of a catalog (one `scenario <name> … end` block
/// per entry).
std::string format_catalog(const std::vector<AttackScenario>& catalog);
std::vector<AttackScenario> parse_catalog(const std::string& text);
std::vector<AttackScenario> load_catalog(const std::filesystem::path& path);

// ---- Sweeps ------------------------------------------------------------------

struct SweepResult {
  std::size_t message_index = 0;
  std::string path;
  int trials = 0;
  int accepts = 0;
  std::map<std::string, int> reject_reasons;
};

/// For every field of the challenge (message 0) and the response (message 1),
/// runs `trials_per_field` sessions with that field randomized and counts
/// acceptances (which must be zero) and the rejecting check.
std::vector<SweepResult> mutation_sweep(World& world, int trials_per_field);

/// Raw-bytes robustness: each session flips one random bit of the response
/// frame. Returns how many sessions were accepted anyway (must be zero).
int framing_fuzz(World& world, int trials);

}  // namespace tedge::harness
