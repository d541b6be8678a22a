//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/verifier.hpp"

#include <algorithm>
#include <fstream>

#include "tedge/errors.hpp"
#include "tedge/registry.hpp"

namespace tedge::verifier {

namespace {

void strip(std::string& line) {
  if (auto hash = line.find('#'); hash != std::string::npos) {
    line.erase(hash);
  }
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  line.erase(line.begin(), std::find_if(line.begin(), line.end(), not_space));
  line.erase(std::find_if(line.rbegin(), line.rend(), not_space).base(),
             line.end());
}

crypto::Digest parse_digest(const std::string& line, int line_no) {
  Bytes raw = from_hex(line);
  if (raw.size() != crypto::kDigestSize) {
    throw Error("policy line " + std::to_string(line_no) +
                ": digest must be " + std::to_string(crypto::kDigestSize) +
                " bytes");
  }
  crypto::Digest digest;
  std::copy(raw.begin(), raw.end(), digest.bytes.begin());
  return digest;
}

}  // namespace

MeasurementPolicy MeasurementPolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open policy file: " + path.string());
  }
  MeasurementPolicy policy;
  std::set<crypto::Digest>* section = nullptr;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip(line);
    if (line.empty()) continue;
    if (line == "[fsbl]") {
      section = &policy.approved_fsbl;
    } else if (line == "[programs]") {
      section = &policy.approved_programs;
    } else if (line.front() == '[') {
      throw Error("policy line " + std::to_string(line_no) +
                  ": unknown section " + line);
    } else if (section == nullptr) {
      throw Error("policy line " + std::to_string(line_no) +
                  ": digest before any section header");
    } else {
      section->insert(parse_digest(line, line_no));
    }
  }
  return policy;
}

void MeasurementPolicy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error("cannot write policy file: " + path.string());
  }
  out << "[fsbl]\n";
  for (const auto& digest : approved_fsbl) {
    out << to_hex(ByteView(digest.bytes)) << "\n";
  }
  out << "\n[programs]\n";
  for (const auto& digest : approved_programs) {
    out << to_hex(ByteView(digest.bytes)) << "\n";
  }
  if (!out.flush()) {
    throw Error("failed writing policy file: " + path.string());
  }
}

TrustDecision TrustDecision::ok() {
  return {Verdict::kTrusted, TrustReason::kOk, std::nullopt};
}

TrustDecision TrustDecision::untrusted(TrustReason reason) {
  return {Verdict::kUntrusted, reason, std::nullopt};
}

TrustDecision TrustDecision::reject(proto::RejectReason reason) {
  return {Verdict::kUntrusted, TrustReason::kProtocolReject, reason};
}

std::string to_string(TrustReason reason) {
  switch (reason) {
    case TrustReason::kOk:
      return "Ok";
    case TrustReason::kUnknownFsbl:
      return "UnknownFsbl";
    case TrustReason::kUnknownProgram:
      return "UnknownProgram";
    case TrustReason::kRevokedFsbl:
      return "RevokedFsbl";
    case TrustReason::kRevokedDevice:
      return "RevokedDevice";
    case TrustReason::kProtocolReject:
      return "ProtocolReject";
  }
  return "?";
}

std::string to_string(const TrustDecision& decision) {
  std::string verdict =
      decision.verdict == Verdict::kTrusted ? "Trusted" : "Untrusted";
  std::string reason = to_string(decision.reason);
  if (decision.protocol_reason) {
    reason += std::string(":") + proto::to_string(*decision.protocol_reason);
  }
  return verdict + "(" + reason + ")";
}

DeviceKey fetch_device_key(proto::Transport& registry,
                           std::uint64_t serial_number,
                           const crypto::Digest& fsbl_digest) {
  registry::RegistryView view(registry);
  auto record = view.lookup(serial_number, fsbl_digest);
  if (!record) {
    return {KeyStatus::kNotFound, {}};
  }
  return {record->revoked ? KeyStatus::kRevoked : KeyStatus::kOk,
          record->device_public_key};
}

Verifier::Verifier(MeasurementPolicy policy,
                   crypto::VerifyingKey registry_service_key, RandomSource& rng)
    : policy_(std::move(policy)),
      service_key_(registry_service_key),
      rng_(rng) {}

AttestationOutcome Verifier::attest(proto::Transport& device,
                                    proto::Transport& registry) {
  if (policy_.empty()) {
    throw Error("measurement policy must approve at least one bootloader and "
                "one program");
  }

  AttestationOutcome outcome;
  auto fail = [&](proto::RejectReason reason) {
    outcome.decision = TrustDecision::reject(reason);
    return outcome;
  };

  // A fresh revocation list is fetched on every run; a list whose signature
  // does not verify under the pinned service key means the registry link has
  // been tampered with and is treated as a transport failure.
  wire::RevocationList revocations;
  DeviceKey device_key;
  try {
    revocations = registry::RegistryView(registry).revocations();
  } catch (const TransportError&) {
    return fail(proto::RejectReason::kTransport);
  } catch (const CodecError&) {
    return fail(proto::RejectReason::kCodec);
  } catch (const RegistryError&) {
    return fail(proto::RejectReason::kTransport);
  }
  if (!crypto::verify(service_key_,
                      as_view(wire::revocation_signed_body(revocations)),
                      revocations.signature)) {
    return fail(proto::RejectReason::kTransport);
  }

  crypto::DhKeypair ephemeral = crypto::generate_dh_keypair(rng_);
  struct Wiper {
    std::array<std::uint8_t, crypto::kDhPrivateSize>& key;
    ~Wiper() { crypto::wipe(key); }
  } wiper{ephemeral.private_key};

  wire::Challenge challenge = proto::make_challenge(ephemeral.public_key, rng_);

  Bytes reply;
  try {
    reply = device.round_trip(as_view(wire::encode(challenge)));
  } catch (const TransportError&) {
    return fail(proto::RejectReason::kTransport);
  }

  wire::Message message;
  try {
    message = wire::decode(as_view(reply));
  } catch (const CodecError&) {
    return fail(proto::RejectReason::kCodec);
  }
  const auto* response = std::get_if<wire::ChallengeResponse>(&message);
  if (response == nullptr) {
    return fail(proto::RejectReason::kTransport);
  }
  outcome.report = response->report;

  // Without a registered key the report's origin cannot be authenticated, so
  // a missing record is the same failure class as a bad device signature.
  try {
    device_key = fetch_device_key(registry, response->report.serial_number,
                                  response->report.fsbl_digest);
  } catch (const TransportError&) {
    return fail(proto::RejectReason::kTransport);
  } catch (const CodecError&) {
    return fail(proto::RejectReason::kCodec);
  } catch (const RegistryError&) {
    return fail(proto::RejectReason::kTransport);
  }
  if (device_key.status == KeyStatus::kNotFound) {
    return fail(proto::RejectReason::kDeviceSigInvalid);
  }

  proto::VerifyOutcome verified =
      proto::verify_response(*response, challenge, device_key.key, nonces_);
  if (!verified.accepted()) {
    return fail(*verified.reject);
  }
  const proto::SessionContext& ctx = *verified.context;
  outcome.context = ctx;

  // Revocation verdicts take precedence over unknown-measurement verdicts.
  if (std::binary_search(revocations.revoked_fsbl_digests.begin(),
                         revocations.revoked_fsbl_digests.end(),
                         ctx.fsbl_digest)) {
    outcome.decision = TrustDecision::untrusted(TrustReason::kRevokedFsbl);
    return outcome;
  }
  wire::DeviceRecordId id{ctx.serial_number, ctx.fsbl_digest};
  if (device_key.status == KeyStatus::kRevoked ||
      std::binary_search(revocations.revoked_device_records.begin(),
                         revocations.revoked_device_records.end(), id)) {
    outcome.decision = TrustDecision::untrusted(TrustReason::kRevokedDevice);
    return outcome;
  }

  if (!policy_.approved_fsbl.contains(ctx.fsbl_digest)) {
    outcome.decision = TrustDecision::untrusted(TrustReason::kUnknownFsbl);
    return outcome;
  }
  if (!policy_.approved_programs.contains(ctx.program_digest)) {
    outcome.decision = TrustDecision::untrusted(TrustReason::kUnknownProgram);
    return outcome;
  }

  outcome.channel = proto::establish_channel(ctx, ephemeral.private_key);
  outcome.decision = TrustDecision::ok();
  return outcome;
}

}  // namespace tedge::verifier
