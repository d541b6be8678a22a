//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// The challenge-response attestation exchange: report construction on the
// device side, the verifier's acceptance checks, and secure-channel
// derivation from the session/verifier DH keys.
//

#pragma once

#include <mutex>
#include <optional>
#include <set>

#include "tedge/bytes.hpp"
#include "tedge/crypto.hpp"
#include "tedge/messages.hpp"
#include "tedge/rng.hpp"

namespace tedge::proto {

/// Why a response (or a whole attestation attempt) was not accepted.
/// kTransport and kCodec arise outside verify_response proper: the peer went
/// silent or sent undecodable bytes.
enum class RejectReason {
  kChallengeMismatch,
  kReplayDetected,
  kSessionSigInvalid,
  kDeviceSigInvalid,
  kTransport,
  kCodec,
};

const char* to_string(RejectReason reason);

/// Everything an accepted exchange pins down about the session.
struct SessionContext {
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  crypto::Digest program_digest;
  crypto::VerifyingKey device_public_key;
  wire::SessionPublicKey session_public_key;
  crypto::DhPublic verifier_public;
  auto operator<=>(const SessionContext&) const = default;
};

/// Shared, synchronized set of nonces already consumed by accepted sessions.
/// Many verifier sessions may insert concurrently.
class NonceRegistry {
 public:
  /// True if the nonce was fresh (and is now recorded).
  bool insert(const std::array<std::uint8_t, wire::kNonceSize>& nonce);
  bool contains(const std::array<std::uint8_t, wire::kNonceSize>& nonce) const;

 private:
  mutable std::mutex mu_;
  std::set<std::array<std::uint8_t, wire::kNonceSize>> seen_;
};

wire::Challenge make_challenge(const crypto::DhPublic& verifier_public,
                               RandomSource& rng);

/// Boot-time report: identity, both measurements and the session public key,
/// signed by the device key so the registry binding authenticates it.
wire::AttestationReport build_report(
    std::uint64_t serial_number, const crypto::Digest& fsbl_digest,
    const crypto::Digest& program_digest,
    const wire::SessionPublicKey& session_public_key,
    const crypto::SigningKeypair& device_key);

/// Device side of the exchange: echo the challenge and sign report ‖ echo
/// with the session key.
wire::ChallengeResponse respond(const wire::AttestationReport& report,
                                const crypto::SigningKeypair& session_signing,
                                const wire::Challenge& challenge);

struct VerifyOutcome {
  std::optional<SessionContext> context;
  std::optional<RejectReason> reject;
  bool accepted() const { return context.has_value(); }
};

/// The verifier's acceptance checks, in order: the echoed challenge must be
/// exactly the one we sent, its nonce must be fresh, the session signature
/// must verify under the report's session key, and the device signature must
/// verify under the registry-published device key. Only on acceptance is the
/// nonce consumed and a SessionContext produced.
VerifyOutcome verify_response(const wire::ChallengeResponse& resp,
                              const wire::Challenge& expected_challenge,
                              const crypto::VerifyingKey& registry_key,
                              NonceRegistry& seen_nonces);

/// Canonical bytes of the context tuple; the channel KDF binds these so a
/// secret is useless outside the session it was derived for.
Bytes context_binding(const SessionContext& ctx);

class SecureChannel {
 public:
  explicit SecureChannel(const crypto::SharedSecret& secret)
      : secret_(secret) {}

  crypto::SealedBox seal(ByteView plaintext, RandomSource& rng) const {
    return crypto::seal(secret_, plaintext, rng);
  }

  Bytes open(ByteView box) const { return crypto::open(secret_, box); }

  const crypto::SharedSecret& secret() const { return secret_; }

 private:
  crypto::SharedSecret secret_;
};

/// Derive the channel from the two ephemeral DH keys in ctx. The caller
/// passes its own private key; the peer public key is whichever of the two
/// context keys is not our own. Throws ChannelError if ctx does not contain
/// our public key, or on degenerate DH input.
SecureChannel establish_channel(
    const SessionContext& ctx,
    const std::array<std::uint8_t, crypto::kDhPrivateSize>& own_dh_private);

/// One request/response hop as the verifier sees it. Implementations include
/// the in-process device endpoint, the socket registry client, and the
/// harness interposer that wraps either.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Deliver one framed request, return the framed reply.
  /// Throws TransportError when the peer is unreachable or drops the message.
  virtual Bytes round_trip(ByteView framed_request) = 0;
};

}  // namespace tedge::proto
