//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Every message that crosses a process boundary: the attestation exchange,
// sealed channel traffic, and the provisioning-registry request/response set.
// Framing is 4-byte big-endian length ‖ 1-byte opcode ‖ body, where the
// length counts the opcode plus body.
//

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tedge/bytes.hpp"
#include "tedge/crypto.hpp"

namespace tedge::wire {

enum class Opcode : std::uint8_t {
  kChallenge = 0x01,
  kChallengeResponse = 0x02,
  kAttestationReport = 0x03,
  kSealedMessage = 0x04,

  kReleaseFsbl = 0x10,
  kRegisterDevice = 0x11,
  kLookup = 0x12,
  kRevoke = 0x13,
  kGetRevocations = 0x14,
  kGetServiceKey = 0x15,

  kAck = 0x20,
  kLookupResult = 0x21,
  kRevocations = 0x22,
  kServiceKey = 0x23,
  kFsblRelease = 0x24,
  kError = 0x2e,
};

inline constexpr std::size_t kNonceSize = 16;

/// The report's session key field carries two keys generated together at
/// boot: a signing key that signs the challenge response and a DH key that
/// feeds channel derivation. Encoded as signing-key ‖ dh-key (64 bytes).
struct SessionPublicKey {
  crypto::VerifyingKey signing;
  crypto::DhPublic dh;
  auto operator<=>(const SessionPublicKey&) const = default;
};

struct Challenge {
  crypto::DhPublic verifier_public;
  std::array<std::uint8_t, kNonceSize> nonce{};
  auto operator<=>(const Challenge&) const = default;
};

struct AttestationReport {
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  crypto::Digest program_digest;
  SessionPublicKey session_public_key;
  std::uint8_t suite_id = crypto::kSuiteId;
  crypto::Signature device_signature;
  auto operator<=>(const AttestationReport&) const = default;
};

struct ChallengeResponse {
  AttestationReport report;
  Challenge echoed_challenge;
  crypto::Signature session_signature;
  auto operator<=>(const ChallengeResponse&) const = default;
};

struct SealedMessage {
  Bytes box;
  auto operator<=>(const SealedMessage&) const = default;
};

// ---- Registry values -------------------------------------------------------

struct RegistryRecord {
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  crypto::VerifyingKey device_public_key;
  bool revoked = false;
  auto operator<=>(const RegistryRecord&) const = default;
};

struct FsblImage {
  Bytes code_bytes;
  crypto::VerifyingKey public_key;
  crypto::Signature signature;
  auto operator<=>(const FsblImage&) const = default;
};

struct FsblRelease {
  FsblImage fsbl;
  std::uint32_t version = 0;
  bool revoked = false;
  auto operator<=>(const FsblRelease&) const = default;
};

/// Identity of one (device, bootloader) key binding.
struct DeviceRecordId {
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  auto operator<=>(const DeviceRecordId&) const = default;
};

/// Signed, monotonically growing revocation sets. Entries are kept strictly
/// sorted so the encoding is canonical; the decoder rejects unsorted or
/// duplicated entries.
struct RevocationList {
  std::vector<crypto::Digest> revoked_fsbl_digests;
  std::vector<DeviceRecordId> revoked_device_records;
  std::uint64_t issued_at = 0;
  crypto::Signature signature;
  auto operator<=>(const RevocationList&) const = default;
};

// ---- Registry requests/responses -------------------------------------------

struct ReleaseFsblRequest {
  Bytes code_bytes;
  auto operator<=>(const ReleaseFsblRequest&) const = default;
};

struct RegisterRequest {
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  crypto::VerifyingKey device_public_key;
  auto operator<=>(const RegisterRequest&) const = default;
};

struct LookupRequest {
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  auto operator<=>(const LookupRequest&) const = default;
};

enum class RevokeKind : std::uint8_t { kFsbl = 1, kDevice = 2 };

/// Fixed layout for both target kinds; serial_number must be zero when the
/// target is a bootloader digest so each request has one encoding.
struct RevokeRequest {
  RevokeKind kind = RevokeKind::kFsbl;
  std::uint64_t serial_number = 0;
  crypto::Digest fsbl_digest;
  auto operator<=>(const RevokeRequest&) const = default;
};

struct GetRevocationsRequest {
  auto operator<=>(const GetRevocationsRequest&) const = default;
};

struct ServiceKeyRequest {
  auto operator<=>(const ServiceKeyRequest&) const = default;
};

struct AckResponse {
  auto operator<=>(const AckResponse&) const = default;
};

struct LookupResponse {
  RegistryRecord record;
  auto operator<=>(const LookupResponse&) const = default;
};

struct RevocationListResponse {
  RevocationList list;
  auto operator<=>(const RevocationListResponse&) const = default;
};

struct ServiceKeyResponse {
  crypto::VerifyingKey service_key;
  auto operator<=>(const ServiceKeyResponse&) const = default;
};

struct FsblReleaseResponse {
  FsblRelease release;
  auto operator<=>(const FsblReleaseResponse&) const = default;
};

enum class WireErrorCode : std::uint8_t {
  kNotFound = 1,
  kDuplicate = 2,
  kUnknownTarget = 3,
  kBadRequest = 4,
};

struct ErrorResponse {
  WireErrorCode code = WireErrorCode::kBadRequest;
  std::string message;
  auto operator<=>(const ErrorResponse&) const = default;
};

using Message =
    std::variant<Challenge, ChallengeResponse, AttestationReport, SealedMessage,
                 ReleaseFsblRequest, RegisterRequest, LookupRequest,
                 RevokeRequest, GetRevocationsRequest, ServiceKeyRequest,
                 AckResponse, LookupResponse, RevocationListResponse,
                 ServiceKeyResponse, FsblReleaseResponse, ErrorResponse>;

Opcode opcode_of(const Message& m);

/// Framed encoding: length ‖ opcode ‖ body.
Bytes encode(const Message& m);

/// Strict inverse of encode over exactly one frame. Anything else —
/// truncation, trailing bytes, unknown opcode, non-canonical field content,
/// or input over 1 MiB — throws CodecError.
Message decode(ByteView framed);

// Byte ranges covered by signatures. These are stable wire contracts: the
// device signature covers every report field before it, and the session
// signature covers the report body followed by the echoed challenge body.
Bytes report_signed_prefix(const AttestationReport& r);
Bytes report_body(const AttestationReport& r);
Bytes challenge_body(const Challenge& c);
Bytes response_signed_portion(const ChallengeResponse& r);
Bytes revocation_signed_body(const RevocationList& l);

// Transcript dumps: newline-delimited hex, one framed message per line.
std::string to_transcript(const std::vector<Bytes>& framed_messages);
std::vector<Bytes> from_transcript(std::string_view text);

}  // namespace tedge::wire
