//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/harness.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "tedge/errors.hpp"

namespace tedge::harness {

// ---- Interposition ----------------------------------------------------------

Interposition passthrough() { return {}; }

Interposition drop() { return {Action::kDrop, 0, {}, {}}; }

Interposition replay(std::size_t recorded_index) {
  return {Action::kReplay, recorded_index, {}, {}};
}

Interposition modify(std::string field_path, Bytes bytes) {
  return {Action::kModify, 0, std::move(field_path), std::move(bytes)};
}

Interposition inject(Bytes framed) {
  return {Action::kInject, 0, {}, std::move(framed)};
}

void RecordingInterposer::set_script(std::vector<Interposition> script) {
  script_ = std::move(script);
}

void RecordingInterposer::script_at(std::size_t message_index,
                                    Interposition step) {
  if (script_.size() <= message_index) {
    script_.resize(message_index + 1);
  }
  script_[message_index] = std::move(step);
}

Bytes RecordingInterposer::round_trip(ByteView framed_request) {
  Bytes request(framed_request.begin(), framed_request.end());
  std::size_t request_index = next_index_++;
  observed_.push_back(request);
  Bytes delivered = apply(request_index, request);

  Bytes response = inner_.round_trip(as_view(delivered));
  std::size_t response_index = next_index_++;
  observed_.push_back(response);
  return apply(response_index, response);
}

Bytes RecordingInterposer::apply(std::size_t index, const Bytes& original) {
  if (index >= script_.size()) return original;
  const Interposition& step = script_[index];
  switch (step.action) {
    case Action::kPassthrough:
      return original;
    case Action::kDrop:
      throw TransportError("interposer dropped message " +
                           std::to_string(index));
    case Action::kReplay:
      if (step.replay_index >= observed_.size()) {
        throw HarnessError("replay of unobserved message " +
                           std::to_string(step.replay_index));
      }
      return observed_[step.replay_index];
    case Action::kModify: {
      if (!step.bytes.empty()) {
        return mutate_field(as_view(original), step.field_path,
                            as_view(step.bytes));
      }
      if (rng_ == nullptr) {
        throw HarnessError("random modify needs an rng-equipped interposer");
      }
      // Draw until the mutated frame actually differs from the original.
      wire::Message decoded = wire::decode(as_view(original));
      auto specs = field_paths(decoded);
      auto spec = std::find_if(specs.begin(), specs.end(), [&](const auto& s) {
        return s.path == step.field_path;
      });
      if (spec == specs.end()) {
        throw HarnessError("unknown field path: " + step.field_path);
      }
      while (true) {
        Bytes mutated = mutate_field(as_view(original), step.field_path,
                                     as_view(rng_->take(spec->size)));
        if (mutated != original) return mutated;
      }
    }
    case Action::kInject:
      return step.bytes;
  }
  throw HarnessError("unhandled interposition action");
}

// ---- Structural field mutation ----------------------------------------------

namespace {

void expect_size(ByteView v, std::size_t want, const std::string& path) {
  if (v.size() != want) {
    throw HarnessError("field " + path + " takes " + std::to_string(want) +
                       " bytes, got " + std::to_string(v.size()));
  }
}

template <std::size_t N>
void put_array(std::array<std::uint8_t, N>& out, ByteView v,
               const std::string& path) {
  expect_size(v, N, path);
  std::copy(v.begin(), v.end(), out.begin());
}

bool set_challenge_field(wire::Challenge& c, const std::string& path,
                         ByteView v) {
  if (path == "verifier_public") {
    put_array(c.verifier_public.bytes, v, path);
    return true;
  }
  if (path == "nonce") {
    put_array(c.nonce, v, path);
    return true;
  }
  return false;
}

bool set_report_field(wire::AttestationReport& r, const std::string& path,
                      ByteView v) {
  if (path == "serial_number") {
    expect_size(v, 8, path);
    std::uint64_t x = 0;
    for (std::uint8_t b : v) x = (x << 8) | b;
    r.serial_number = x;
    return true;
  }
  if (path == "fsbl_digest") {
    put_array(r.fsbl_digest.bytes, v, path);
    return true;
  }
  if (path == "program_digest") {
    put_array(r.program_digest.bytes, v, path);
    return true;
  }
  if (path == "session_public_key.signing") {
    put_array(r.session_public_key.signing.bytes, v, path);
    return true;
  }
  if (path == "session_public_key.dh") {
    put_array(r.session_public_key.dh.bytes, v, path);
    return true;
  }
  if (path == "suite_id") {
    expect_size(v, 1, path);
    r.suite_id = v[0];
    return true;
  }
  if (path == "device_signature") {
    put_array(r.device_signature.bytes, v, path);
    return true;
  }
  return false;
}

bool set_response_field(wire::ChallengeResponse& resp, const std::string& path,
                        ByteView v) {
  if (path.starts_with("report.")) {
    return set_report_field(resp.report, path.substr(7), v);
  }
  if (path.starts_with("echoed_challenge.")) {
    return set_challenge_field(resp.echoed_challenge, path.substr(17), v);
  }
  if (path == "session_signature") {
    put_array(resp.session_signature.bytes, v, path);
    return true;
  }
  return false;
}

const std::vector<FieldSpec>& challenge_specs() {
  static const std::vector<FieldSpec> specs = {
      {"verifier_public", crypto::kDhPublicSize},
      {"nonce", wire::kNonceSize},
  };
  return specs;
}

const std::vector<FieldSpec>& report_specs() {
  static const std::vector<FieldSpec> specs = {
      {"serial_number", 8},
      {"fsbl_digest", crypto::kDigestSize},
      {"program_digest", crypto::kDigestSize},
      {"session_public_key.signing", crypto::kVerifyingKeySize},
      {"session_public_key.dh", crypto::kDhPublicSize},
      {"suite_id", 1},
      {"device_signature", crypto::kSignatureSize},
  };
  return specs;
}

}  // namespace

std::vector<FieldSpec> field_paths(const wire::Message& message) {
  std::vector<FieldSpec> specs;
  if (std::holds_alternative<wire::Challenge>(message)) {
    return challenge_specs();
  }
  if (std::holds_alternative<wire::AttestationReport>(message)) {
    return report_specs();
  }
  if (std::holds_alternative<wire::ChallengeResponse>(message)) {
    for (const auto& s : report_specs()) {
      specs.push_back({"report." + s.path, s.size});
    }
    for (const auto& s : challenge_specs()) {
      specs.push_back({"echoed_challenge." + s.path, s.size});
    }
    specs.push_back({"session_signature", crypto::kSignatureSize});
  }
  return specs;
}

Bytes mutate_field(ByteView framed, const std::string& field_path,
                   ByteView replacement) {
  wire::Message message = wire::decode(framed);
  bool found = false;
  if (auto* c = std::get_if<wire::Challenge>(&message)) {
    found = set_challenge_field(*c, field_path, replacement);
  } else if (auto* r = std::get_if<wire::AttestationReport>(&message)) {
    found = set_report_field(*r, field_path, replacement);
  } else if (auto* resp = std::get_if<wire::ChallengeResponse>(&message)) {
    found = set_response_field(*resp, field_path, replacement);
  } else {
    throw HarnessError("message type has no mutable fields");
  }
  if (!found) {
    throw HarnessError("unknown field path: " + field_path);
  }
  return wire::encode(message);
}

std::vector<Bytes> record_and_mutate(const std::vector<Bytes>& transcript,
                                     const std::string& field_path,
                                     ByteView replacement) {
  std::vector<Bytes> out;
  out.reserve(transcript.size());
  bool mutated_any = false;
  for (const Bytes& frame : transcript) {
    wire::Message message = wire::decode(as_view(frame));
    auto specs = field_paths(message);
    bool has_field = std::any_of(specs.begin(), specs.end(), [&](const auto& s) {
      return s.path == field_path;
    });
    if (has_field) {
      out.push_back(mutate_field(as_view(frame), field_path, replacement));
      mutated_any = true;
    } else {
      out.push_back(frame);
    }
  }
  if (!mutated_any) {
    throw HarnessError("no transcript message carries field " + field_path);
  }
  return out;
}

// ---- World -------------------------------------------------------------------

namespace {

std::filesystem::path unique_log_path(std::uint64_t seed) {
  static std::atomic<std::uint64_t> counter{0};
  auto dir = std::filesystem::temp_directory_path() / "tedge-worlds";
  std::filesystem::create_directories(dir);
  return dir / ("world-" + std::to_string(seed) + "-" +
                std::to_string(counter++) + ".log");
}

}  // namespace

World::World(std::uint64_t seed) : World(seed, unique_log_path(seed)) {}

World::World(std::uint64_t seed, const std::filesystem::path& registry_log)
    : rng_(seed) {
  std::filesystem::remove(registry_log);
  registry_ = std::make_unique<registry::RegistryService>(registry_log, rng_);
  registry_link_ = std::make_unique<registry::LocalRegistry>(*registry_);

  Bytes fsbl_code = rng_.take(320);
  fsbl_release_ = registry_->release_fsbl(as_view(fsbl_code));
  fsbl_digest_ = crypto::hash(as_view(fsbl_code));

  good_image_ = {{rng_.take(512), "conv2d-accelerator", false},
                 rng_.take(160)};
  // Same deployment story, different configuration bytes: the unapproved
  // variant is visible only through its measurement.
  rogue_image_ = {{rng_.take(512), "conv2d-accelerator", false},
                  rng_.take(160)};
  good_program_digest_ = device::measure(good_image_);

  verifier::MeasurementPolicy policy;
  policy.approved_fsbl.insert(fsbl_digest_);
  policy.approved_programs.insert(good_program_digest_);
  user_ = std::make_unique<verifier::Verifier>(std::move(policy),
                                               registry_->service_key(), rng_);

  spawn_device(good_image_);
}

World::Station& World::spawn_device(
    const device::SystemImage& image,
    std::optional<crypto::VerifyingKey> registry_key_override) {
  std::uint64_t serial = next_serial_++;
  device::EmulatedDevice& dev = factory_.manufacture(serial);
  Bytes secret = rng_.take(32);
  device::DevicePublicRecord record =
      dev.provision(as_view(secret), registry_->boot_key_hash(), fsbl_digest_);
  registry_->register_device(
      serial, fsbl_digest_,
      registry_key_override.value_or(record.device_public_key));

  device::BootOutcome outcome = dev.boot(fsbl_release_.fsbl, image, rng_);
  if (outcome.stage != device::BootStage::kSecureOs) {
    throw Error("world setup: device " + std::to_string(serial) +
                " failed to boot");
  }

  stations_.push_back(Station{
      &dev, std::make_unique<device::DeviceEndpoint>(dev, rng_), secret});
  return stations_.back();
}

verifier::AttestationOutcome World::attest(proto::Transport& device) {
  return user_->attest(device, *registry_link_);
}

verifier::AttestationOutcome World::attest_primary() {
  return attest(*primary().endpoint);
}

// ---- Scenario plumbing --------------------------------------------------------

const char* to_string(ThreatRef threat) {
  switch (threat) {
    case ThreatRef::kT1ManuPrivacy:
      return "T1_ManuPrivacy";
    case ThreatRef::kT2ProvPrivacy:
      return "T2_ProvPrivacy";
    case ThreatRef::kT3WrongApp:
      return "T3_WrongApp";
    case ThreatRef::kT4OutsideTee:
      return "T4_OutsideTee";
    case ThreatRef::kT5Mitm:
      return "T5_Mitm";
    case ThreatRef::kT6MaliciousDev:
      return "T6_MaliciousDev";
  }
  return "?";
}

std::optional<ThreatRef> parse_threat(std::string_view text) {
  for (ThreatRef t :
       {ThreatRef::kT1ManuPrivacy, ThreatRef::kT2ProvPrivacy,
        ThreatRef::kT3WrongApp, ThreatRef::kT4OutsideTee, ThreatRef::kT5Mitm,
        ThreatRef::kT6MaliciousDev}) {
    if (text == to_string(t)) return t;
  }
  return std::nullopt;
}

const char* to_string(ScenarioMode mode) {
  switch (mode) {
    case ScenarioMode::kControl:
      return "control";
    case ScenarioMode::kMitm:
      return "mitm";
    case ScenarioMode::kReplaySession:
      return "replay-session";
    case ScenarioMode::kOutsideTee:
      return "outside-tee";
    case ScenarioMode::kWrongDevice:
      return "wrong-device";
    case ScenarioMode::kWrongProgram:
      return "wrong-program";
    case ScenarioMode::kKeyScan:
      return "key-scan";
    case ScenarioMode::kManufacturerPrivacy:
      return "manufacturer-privacy";
    case ScenarioMode::kRegistryPrivacy:
      return "registry-privacy";
  }
  return "?";
}

std::optional<ScenarioMode> parse_mode(std::string_view text) {
  for (ScenarioMode m :
       {ScenarioMode::kControl, ScenarioMode::kMitm,
        ScenarioMode::kReplaySession, ScenarioMode::kOutsideTee,
        ScenarioMode::kWrongDevice, ScenarioMode::kWrongProgram,
        ScenarioMode::kKeyScan, ScenarioMode::kManufacturerPrivacy,
        ScenarioMode::kRegistryPrivacy}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

bool matches(const Expectation& expected,
             const verifier::TrustDecision& decision) {
  switch (expected.kind) {
    case Expectation::Kind::kTrusted:
    case Expectation::Kind::kCleanScan:
      return decision.trusted();
    case Expectation::Kind::kUntrusted:
      return !decision.trusted() && decision.reason == expected.reason;
    case Expectation::Kind::kReject:
      return decision.reason == verifier::TrustReason::kProtocolReject &&
             decision.protocol_reason.has_value() &&
             std::find(expected.any_of.begin(), expected.any_of.end(),
                       *decision.protocol_reason) != expected.any_of.end();
  }
  return false;
}

std::string to_string(const Expectation& expected) {
  switch (expected.kind) {
    case Expectation::Kind::kTrusted:
      return "trusted";
    case Expectation::Kind::kCleanScan:
      return "clean-scan";
    case Expectation::Kind::kUntrusted:
      return "untrusted " + verifier::to_string(expected.reason);
    case Expectation::Kind::kReject: {
      std::string out = "reject";
      for (proto::RejectReason r : expected.any_of) {
        out += std::string(" ") + proto::to_string(r);
      }
      return out;
    }
  }
  return "?";
}

// ---- Scenario execution --------------------------------------------------------

namespace {

/// Threat model T4: an attacker that follows the protocol perfectly but was
/// never provisioned — every key is its own invention. It claims the identity
/// and measurements of a real device.
class FakeDevice : public proto::Transport {
 public:
  FakeDevice(std::uint64_t claimed_serial, const crypto::Digest& fsbl_digest,
             const crypto::Digest& program_digest, RandomSource& rng)
      : device_key_(crypto::generate_signing_keypair(rng)),
        session_signing_(crypto::generate_signing_keypair(rng)),
        session_dh_(crypto::generate_dh_keypair(rng)) {
    report_ = proto::build_report(
        claimed_serial, fsbl_digest, program_digest,
        {session_signing_.public_key, session_dh_.public_key}, device_key_);
  }

  Bytes round_trip(ByteView framed_request) override {
    wire::Message message = wire::decode(framed_request);
    auto* challenge = std::get_if<wire::Challenge>(&message);
    if (challenge == nullptr) {
      return wire::encode(wire::ErrorResponse{
          wire::WireErrorCode::kBadRequest, "fake device serves challenges"});
    }
    return wire::encode(proto::respond(report_, session_signing_, *challenge));
  }

 private:
  crypto::SigningKeypair device_key_;
  crypto::SigningKeypair session_signing_;
  crypto::DhKeypair session_dh_;
  wire::AttestationReport report_;
};

std::string describe(const verifier::TrustDecision& decision) {
  return verifier::to_string(decision);
}

ScenarioReport grade(const AttackScenario& scenario,
                     const verifier::TrustDecision& decision) {
  ScenarioReport report;
  report.name = scenario.name;
  report.threat_ref = scenario.threat_ref;
  report.expected = to_string(scenario.expect);
  report.observed = describe(decision);
  report.passed = matches(scenario.expect, decision);
  return report;
}

ScenarioReport grade_scan(const AttackScenario& scenario,
                          const verifier::TrustDecision& control,
                          bool scan_clean, const std::string& scan_label) {
  ScenarioReport report;
  report.name = scenario.name;
  report.threat_ref = scenario.threat_ref;
  report.expected = to_string(scenario.expect);
  report.observed =
      scan_label + (scan_clean ? ": clean" : ": HIT") + ", control " +
      describe(control);
  report.passed = scan_clean && matches(scenario.expect, control);
  return report;
}

}  // namespace

ScenarioReport run_scenario(World& world, const AttackScenario& scenario) {
  switch (scenario.mode) {
    case ScenarioMode::kControl: {
      auto outcome = world.attest_primary();
      ScenarioReport report = grade(scenario, outcome.decision);
      // The control case must also actually deliver a channel.
      report.passed = report.passed && outcome.channel.has_value();
      return report;
    }

    case ScenarioMode::kMitm: {
      RecordingInterposer tap(*world.primary().endpoint, &world.rng());
      tap.set_script(scenario.script);
      auto outcome = world.attest(tap);
      return grade(scenario, outcome.decision);
    }

    case ScenarioMode::kReplaySession: {
      RecordingInterposer tap(*world.primary().endpoint, &world.rng());
      auto first = world.attest(tap);
      if (!first.decision.trusted()) {
        ScenarioReport report = grade(scenario, first.decision);
        report.observed = "recording session failed: " + report.observed;
        report.passed = false;
        return report;
      }
      // Messages 0/1 are recorded; substitute the recorded response for the
      // fresh one in a second session.
      tap.script_at(3, replay(1));
      auto second = world.attest(tap);
      return grade(scenario, second.decision);
    }

    case ScenarioMode::kOutsideTee: {
      FakeDevice attacker(world.primary().dev->serial_number(),
                          world.fsbl_digest(), world.good_program_digest(),
                          world.rng());
      auto outcome = world.attest(attacker);
      return grade(scenario, outcome.decision);
    }

    case ScenarioMode::kWrongDevice: {
      crypto::VerifyingKey foreign =
          crypto::generate_signing_keypair(world.rng()).public_key;
      auto& station = world.spawn_device(world.good_image(), foreign);
      auto outcome = world.attest(*station.endpoint);
      return grade(scenario, outcome.decision);
    }

    case ScenarioMode::kWrongProgram: {
      auto& station = world.spawn_device(world.rogue_image());
      auto outcome = world.attest(*station.endpoint);
      return grade(scenario, outcome.decision);
    }

    case ScenarioMode::kKeyScan: {
      // A malicious application sweeps everything it can address — device
      // RAM models plus every frame that crossed the wire — for the OTP
      // secret or the derived device signing key.
      RecordingInterposer tap(*world.primary().endpoint, &world.rng());
      auto control = world.attest(tap);
      World::Station& station = world.primary();

      crypto::SigningKeypair device_key = crypto::derive_device_keypair(
          as_view(station.provisioning_secret), world.fsbl_digest());
      std::vector<Bytes> needles;
      needles.push_back(station.provisioning_secret);
      needles.emplace_back(device_key.private_key.begin(),
                           device_key.private_key.end());
      // The seed half alone is enough to reconstruct the key.
      needles.emplace_back(device_key.private_key.begin(),
                           device_key.private_key.begin() + 32);

      Bytes haystack = station.dev->application_visible_bytes();
      for (const Bytes& frame : tap.observed()) {
        haystack.insert(haystack.end(), frame.begin(), frame.end());
      }
      Bytes audit = world.registry_service().audit_bytes();
      haystack.insert(haystack.end(), audit.begin(), audit.end());

      bool clean = std::none_of(needles.begin(), needles.end(),
                                [&](const Bytes& needle) {
                                  return contains(as_view(haystack),
                                                  as_view(needle));
                                });
      crypto::wipe(device_key.private_key);
      return grade_scan(scenario, control.decision, clean, "key scan");
    }

    case ScenarioMode::kManufacturerPrivacy: {
      auto control = world.attest_primary();
      Bytes record = world.factory().record_bytes();
      // u32 count followed by one u64 serial per device — nothing else.
      bool clean =
          !contains(as_view(record), ByteView(world.good_program_digest().bytes)) &&
          !contains(as_view(record), ByteView(world.fsbl_digest().bytes)) &&
          record.size() == 4 + world.factory().device_count() * 8;
      return grade_scan(scenario, control.decision, clean,
                        "manufacturer record");
    }

    case ScenarioMode::kRegistryPrivacy: {
      auto control = world.attest_primary();
      Bytes audit = world.registry_service().audit_bytes();
      std::size_t entries = world.registry_service().audit_entries().size();
      bool clean =
          !contains(as_view(audit), ByteView(world.good_program_digest().bytes)) &&
          audit.size() == entries * (8 + crypto::kDigestSize);
      return grade_scan(scenario, control.decision, clean, "registry audit");
    }
  }
  throw HarnessError("unhandled scenario mode");
}

// ---- Catalog -----------------------------------------------------------------

std::vector<AttackScenario> builtin_catalog() {
  std::vector<AttackScenario> catalog;

  auto add = [&](AttackScenario s) { catalog.push_back(std::move(s)); };
  using Kind = Expectation::Kind;

  add({"attest-control", ThreatRef::kT5Mitm, ScenarioMode::kControl,
       {}, {Kind::kTrusted, {}, {}}});
  add({"wrong-program", ThreatRef::kT3WrongApp, ScenarioMode::kWrongProgram,
       {}, {Kind::kUntrusted, verifier::TrustReason::kUnknownProgram, {}}});
  add({"outside-tee", ThreatRef::kT4OutsideTee, ScenarioMode::kOutsideTee,
       {}, {Kind::kReject, {}, {proto::RejectReason::kDeviceSigInvalid}}});
  add({"wrong-device", ThreatRef::kT4OutsideTee, ScenarioMode::kWrongDevice,
       {}, {Kind::kReject, {}, {proto::RejectReason::kDeviceSigInvalid}}});
  add({"replay-response", ThreatRef::kT5Mitm, ScenarioMode::kReplaySession,
       {},
       {Kind::kReject, {},
        {proto::RejectReason::kReplayDetected,
         proto::RejectReason::kChallengeMismatch}}});
  add({"tamper-report-program", ThreatRef::kT5Mitm, ScenarioMode::kMitm,
       {passthrough(), modify("report.program_digest")},
       {Kind::kReject, {}, {proto::RejectReason::kSessionSigInvalid}}});
  add({"tamper-device-signature", ThreatRef::kT5Mitm, ScenarioMode::kMitm,
       {passthrough(), modify("report.device_signature")},
       {Kind::kReject, {}, {proto::RejectReason::kSessionSigInvalid}}});
  add({"tamper-challenge-nonce", ThreatRef::kT5Mitm, ScenarioMode::kMitm,
       {modify("nonce")},
       {Kind::kReject, {}, {proto::RejectReason::kChallengeMismatch}}});
  add({"drop-response", ThreatRef::kT5Mitm, ScenarioMode::kMitm,
       {passthrough(), drop()},
       {Kind::kReject, {}, {proto::RejectReason::kTransport}}});
  add({"inject-error-response", ThreatRef::kT5Mitm, ScenarioMode::kMitm,
       {passthrough(),
        inject(wire::encode(wire::ErrorResponse{
            wire::WireErrorCode::kBadRequest, "attacker says no"}))},
       {Kind::kReject, {}, {proto::RejectReason::kTransport}}});
  add({"key-scan", ThreatRef::kT6MaliciousDev, ScenarioMode::kKeyScan,
       {}, {Kind::kCleanScan, {}, {}}});
  add({"manufacturer-privacy", ThreatRef::kT1ManuPrivacy,
       ScenarioMode::kManufacturerPrivacy, {}, {Kind::kCleanScan, {}, {}}});
  add({"registry-privacy", ThreatRef::kT2ProvPrivacy,
       ScenarioMode::kRegistryPrivacy, {}, {Kind::kCleanScan, {}, {}}});

  validate_catalog(catalog);
  return catalog;
}

void validate_catalog(const std::vector<AttackScenario>& catalog) {
  if (catalog.empty()) throw HarnessError("catalog is empty");
  std::set<ThreatRef> covered;
  std::set<std::string> names;
  for (const AttackScenario& s : catalog) {
    if (s.name.empty()) throw HarnessError("catalog scenario without a name");
    if (!names.insert(s.name).second) {
      throw HarnessError("duplicate scenario name: " + s.name);
    }
    covered.insert(s.threat_ref);
    for (const Interposition& step : s.script) {
      if (step.action == Action::kModify && step.field_path.empty()) {
        throw HarnessError(s.name + ": modify step without a field path");
      }
      if (step.action == Action::kInject && step.bytes.empty()) {
        throw HarnessError(s.name + ": inject step without a frame");
      }
    }
  }
  for (ThreatRef t :
       {ThreatRef::kT1ManuPrivacy, ThreatRef::kT2ProvPrivacy,
        ThreatRef::kT3WrongApp, ThreatRef::kT4OutsideTee, ThreatRef::kT5Mitm,
        ThreatRef::kT6MaliciousDev}) {
    if (!covered.contains(t)) {
      throw HarnessError(std::string("catalog does not cover ") +
                         to_string(t));
    }
  }
}

namespace {

std::string format_step(const Interposition& step) {
  switch (step.action) {
    case Action::kPassthrough:
      return "passthrough";
    case Action::kDrop:
      return "drop";
    case Action::kReplay:
      return "replay " + std::to_string(step.replay_index);
    case Action::kModify:
      return "modify " + step.field_path + " " +
             (step.bytes.empty() ? "random" : to_hex(as_view(step.bytes)));
    case Action::kInject:
      return "inject " + to_hex(as_view(step.bytes));
  }
  return "?";
}

std::string format_expect(const Expectation& e) { return to_string(e); }

std::vector<std::string> split_words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> words;
  std::string word;
  while (in >> word) words.push_back(word);
  return words;
}

Interposition parse_step(const std::vector<std::string>& words,
                         std::size_t from, const std::string& context) {
  if (from >= words.size()) {
    throw HarnessError(context + ": step without an action");
  }
  const std::string& action = words[from];
  if (action == "passthrough") return passthrough();
  if (action == "drop") return drop();
  if (action == "replay") {
    if (from + 1 >= words.size()) {
      throw HarnessError(context + ": replay needs an index");
    }
    return replay(std::stoul(words[from + 1]));
  }
  if (action == "modify") {
    if (from + 2 >= words.size()) {
      throw HarnessError(context + ": modify needs a path and bytes");
    }
    Bytes bytes =
        words[from + 2] == "random" ? Bytes{} : from_hex(words[from + 2]);
    return modify(words[from + 1], std::move(bytes));
  }
  if (action == "inject") {
    if (from + 1 >= words.size()) {
      throw HarnessError(context + ": inject needs a hex frame");
    }
    return inject(from_hex(words[from + 1]));
  }
  throw HarnessError(context + ": unknown step action " + action);
}

Expectation parse_expect(const std::vector<std::string>& words,
                         const std::string& context) {
  using Kind = Expectation::Kind;
  if (words.size() < 2) throw HarnessError(context + ": empty expectation");
  if (words[1] == "trusted") return {Kind::kTrusted, {}, {}};
  if (words[1] == "clean-scan") return {Kind::kCleanScan, {}, {}};
  if (words[1] == "untrusted") {
    if (words.size() != 3) {
      throw HarnessError(context + ": untrusted needs one reason");
    }
    for (verifier::TrustReason r :
         {verifier::TrustReason::kUnknownFsbl,
          verifier::TrustReason::kUnknownProgram,
          verifier::TrustReason::kRevokedFsbl,
          verifier::TrustReason::kRevokedDevice}) {
      if (words[2] == verifier::to_string(r)) return {Kind::kUntrusted, r, {}};
    }
    throw HarnessError(context + ": unknown trust reason " + words[2]);
  }
  if (words[1] == "reject") {
    Expectation e{Kind::kReject, {}, {}};
    for (std::size_t i = 2; i < words.size(); ++i) {
      bool known = false;
      for (proto::RejectReason r :
           {proto::RejectReason::kChallengeMismatch,
            proto::RejectReason::kReplayDetected,
            proto::RejectReason::kSessionSigInvalid,
            proto::RejectReason::kDeviceSigInvalid,
            proto::RejectReason::kTransport, proto::RejectReason::kCodec}) {
        if (words[i] == proto::to_string(r)) {
          e.any_of.push_back(r);
          known = true;
          break;
        }
      }
      if (!known) {
        throw HarnessError(context + ": unknown reject reason " + words[i]);
      }
    }
    if (e.any_of.empty()) {
      throw HarnessError(context + ": reject expectation lists no reasons");
    }
    return e;
  }
  throw HarnessError(context + ": unknown expectation " + words[1]);
}

}  // namespace

std::string format_catalog(const std::vector<AttackScenario>& catalog) {
  std::ostringstream out;
  out << "# attack scenario catalog\n";
  for (const AttackScenario& s : catalog) {
    out << "\nscenario " << s.name << "\n";
    out << "threat " << to_string(s.threat_ref) << "\n";
    out << "mode " << to_string(s.mode) << "\n";
    for (std::size_t i = 0; i < s.script.size(); ++i) {
      if (s.script[i].action == Action::kPassthrough) continue;
      out << "step " << i << " " << format_step(s.script[i]) << "\n";
    }
    out << "expect " << format_expect(s.expect) << "\n";
    out << "end\n";
  }
  return out.str();
}

std::vector<AttackScenario> parse_catalog(const std::string& text) {
  std::vector<AttackScenario> catalog;
  std::istringstream in(text);
  std::string line;
  std::optional<AttackScenario> current;
  bool have_expect = false;
  int line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    auto words = split_words(line);
    if (words.empty()) continue;
    std::string context = "catalog line " + std::to_string(line_no);

    if (words[0] == "scenario") {
      if (current) throw HarnessError(context + ": nested scenario");
      if (words.size() != 2) throw HarnessError(context + ": scenario needs a name");
      current = AttackScenario{};
      current->name = words[1];
      have_expect = false;
    } else if (!current) {
      throw HarnessError(context + ": directive outside a scenario block");
    } else if (words[0] == "threat") {
      auto threat = words.size() == 2 ? parse_threat(words[1]) : std::nullopt;
      if (!threat) throw HarnessError(context + ": bad threat reference");
      current->threat_ref = *threat;
    } else if (words[0] == "mode") {
      auto mode = words.size() == 2 ? parse_mode(words[1]) : std::nullopt;
      if (!mode) throw HarnessError(context + ": bad mode");
      current->mode = *mode;
    } else if (words[0] == "step") {
      if (words.size() < 3) throw HarnessError(context + ": step needs an index");
      std::size_t index = std::stoul(words[1]);
      if (current->script.size() <= index) current->script.resize(index + 1);
      current->script[index] = parse_step(words, 2, context);
    } else if (words[0] == "expect") {
      current->expect = parse_expect(words, context);
      have_expect = true;
    } else if (words[0] == "end") {
      if (!have_expect) {
        throw HarnessError(context + ": scenario " + current->name +
                           " has no expectation");
      }
      catalog.push_back(std::move(*current));
      current.reset();
    } else {
      throw HarnessError(context + ": unknown directive " + words[0]);
    }
  }
  if (current) {
    throw HarnessError("catalog ends inside scenario " + current->name);
  }
  return catalog;
}

std::vector<AttackScenario> load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw HarnessError("cannot open catalog: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  auto catalog = parse_catalog(text.str());
  validate_catalog(catalog);
  return catalog;
}

// ---- Sweeps ------------------------------------------------------------------

std::vector<SweepResult> mutation_sweep(World& world, int trials_per_field) {
  std::vector<SweepResult> results;

  // Message 0 is the challenge we can inspect offline; message 1 the
  // response. Enumerate their fields from throwaway instances.
  wire::Message challenge_shape = wire::Challenge{};
  wire::Message response_shape = wire::ChallengeResponse{};
  const std::vector<std::pair<std::size_t, std::vector<FieldSpec>>> targets = {
      {0, field_paths(challenge_shape)},
      {1, field_paths(response_shape)},
  };

  for (const auto& [message_index, specs] : targets) {
    for (const FieldSpec& spec : specs) {
      SweepResult result;
      result.message_index = message_index;
      result.path = spec.path;
      result.trials = trials_per_field;
      for (int trial = 0; trial < trials_per_field; ++trial) {
        RecordingInterposer tap(*world.primary().endpoint, &world.rng());
        tap.script_at(message_index, modify(spec.path));
        auto outcome = world.attest(tap);
        if (outcome.decision.trusted()) {
          ++result.accepts;
        } else {
          ++result.reject_reasons[verifier::to_string(outcome.decision)];
        }
      }
      results.push_back(std::move(result));
    }
  }
  return results;
}

namespace {

/// Flips one rng-chosen bit of every reply.
class BitFlipTransport : public proto::Transport {
 public:
  BitFlipTransport(proto::Transport& inner, RandomSource& rng)
      : inner_(inner), rng_(rng) {}

  Bytes round_trip(ByteView framed_request) override {
    Bytes reply = inner_.round_trip(framed_request);
    std::size_t bit = rng_.next_u64() % (reply.size() * 8);
    reply[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    return reply;
  }

 private:
  proto::Transport& inner_;
  RandomSource& rng_;
};

}  // namespace

int framing_fuzz(World& world, int trials) {
  BitFlipTransport flipper(*world.primary().endpoint, world.rng());
  int accepts = 0;
  for (int trial = 0; trial < trials; ++trial) {
    if (world.attest(flipper).decision.trusted()) ++accepts;
  }
  return accepts;
}

}  // namespace tedge::harness
