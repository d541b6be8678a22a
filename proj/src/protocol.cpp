//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/protocol.hpp"

#include <sodium.h>

#include "tedge/codec.hpp"
#include "tedge/errors.hpp"

namespace tedge::proto {

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kChallengeMismatch:
      return "ChallengeMismatch";
    case RejectReason::kReplayDetected:
      return "ReplayDetected";
    case RejectReason::kSessionSigInvalid:
      return "SessionSigInvalid";
    case RejectReason::kDeviceSigInvalid:
      return "DeviceSigInvalid";
    case RejectReason::kTransport:
      return "Transport";
    case RejectReason::kCodec:
      return "Codec";
  }
  return "Unknown";
}

bool NonceRegistry::insert(
    const std::array<std::uint8_t, wire::kNonceSize>& nonce) {
  std::lock_guard lock(mu_);
  return seen_.insert(nonce).second;
}

bool NonceRegistry::contains(
    const std::array<std::uint8_t, wire::kNonceSize>& nonce) const {
  std::lock_guard lock(mu_);
  return seen_.contains(nonce);
}

wire::Challenge make_challenge(const crypto::DhPublic& verifier_public,
                               RandomSource& rng) {
  wire::Challenge c;
  c.verifier_public = verifier_public;
  rng.fill(c.nonce);
  return c;
}

wire::AttestationReport build_report(
    std::uint64_t serial_number, const crypto::Digest& fsbl_digest,
    const crypto::Digest& program_digest,
    const wire::SessionPublicKey& session_public_key,
    const crypto::SigningKeypair& device_key) {
  wire::AttestationReport report;
  report.serial_number = serial_number;
  report.fsbl_digest = fsbl_digest;
  report.program_digest = program_digest;
  report.session_public_key = session_public_key;
  report.suite_id = crypto::kSuiteId;
  report.device_signature =
      crypto::sign(device_key, as_view(wire::report_signed_prefix(report)));
  return report;
}

wire::ChallengeResponse respond(const wire::AttestationReport& report,
                                const crypto::SigningKeypair& session_signing,
                                const wire::Challenge& challenge) {
  wire::ChallengeResponse resp;
  resp.report = report;
  resp.echoed_challenge = challenge;
  resp.session_signature = crypto::sign(
      session_signing, as_view(wire::response_signed_portion(resp)));
  return resp;
}

VerifyOutcome verify_response(const wire::ChallengeResponse& resp,
                              const wire::Challenge& expected_challenge,
                              const crypto::VerifyingKey& registry_key,
                              NonceRegistry& seen_nonces) {
  VerifyOutcome out;

  if (resp.echoed_challenge != expected_challenge) {
    out.reject = RejectReason::kChallengeMismatch;
    return out;
  }
  if (seen_nonces.contains(resp.echoed_challenge.nonce)) {
    out.reject = RejectReason::kReplayDetected;
    return out;
  }
  if (!crypto::verify(resp.report.session_public_key.signing,
                      as_view(wire::response_signed_portion(resp)),
                      resp.session_signature)) {
    out.reject = RejectReason::kSessionSigInvalid;
    return out;
  }
  // A report under a suite we cannot verify fails device authentication the
  // same way a bad signature does.
  if (resp.report.suite_id != crypto::kSuiteId ||
      !crypto::verify(registry_key,
                      as_view(wire::report_signed_prefix(resp.report)),
                      resp.report.device_signature)) {
    out.reject = RejectReason::kDeviceSigInvalid;
    return out;
  }
  // insert() is the atomic freshness commit; losing the race to a concurrent
  // session with the same nonce is a replay.
  if (!seen_nonces.insert(resp.echoed_challenge.nonce)) {
    out.reject = RejectReason::kReplayDetected;
    return out;
  }

  SessionContext ctx;
  ctx.serial_number = resp.report.serial_number;
  ctx.fsbl_digest = resp.report.fsbl_digest;
  ctx.program_digest = resp.report.program_digest;
  ctx.device_public_key = registry_key;
  ctx.session_public_key = resp.report.session_public_key;
  ctx.verifier_public = resp.echoed_challenge.verifier_public;
  out.context = ctx;
  return out;
}

Bytes context_binding(const SessionContext& ctx) {
  wire::Writer w;
  w.u64(ctx.serial_number);
  w.fixed(ctx.fsbl_digest.bytes);
  w.fixed(ctx.program_digest.bytes);
  w.fixed(ctx.device_public_key.bytes);
  w.fixed(ctx.session_public_key.signing.bytes);
  w.fixed(ctx.session_public_key.dh.bytes);
  w.fixed(ctx.verifier_public.bytes);
  return w.take();
}

SecureChannel establish_channel(
    const SessionContext& ctx,
    const std::array<std::uint8_t, crypto::kDhPrivateSize>& own_dh_private) {
  crypto::DhPublic own_public;
  crypto_scalarmult_base(own_public.bytes.data(), own_dh_private.data());

  // The peer key is whichever context key is not ours.
  crypto::DhPublic peer;
  if (own_public == ctx.verifier_public) {
    peer = ctx.session_public_key.dh;
  } else if (own_public == ctx.session_public_key.dh) {
    peer = ctx.verifier_public;
  } else {
    throw ChannelError("private key does not belong to this session");
  }

  crypto::SharedSecret shared = crypto::dh_agree(own_dh_private, peer);

  static constexpr char kLabel[] = "tedge-channel-v1";
  Bytes binding = concat(
      {ByteView(reinterpret_cast<const std::uint8_t*>(kLabel),
                sizeof(kLabel) - 1),
       as_view(context_binding(ctx))});
  crypto::Digest derived = crypto::keyed_kdf(shared, as_view(binding));
  crypto::SharedSecret secret;
  secret.bytes = derived.bytes;
  crypto::wipe(shared.bytes);
  return SecureChannel(secret);
}

}  // namespace tedge::proto
