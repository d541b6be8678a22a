//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <algorithm>
#include <set>
#include <variant>
#include <vector>

#include "tedge/codec.hpp"
#include "tedge/errors.hpp"
#include "tedge/messages.hpp"
#include "tedge/rng.hpp"

using namespace tedge;
using namespace tedge::wire;

namespace {

crypto::Digest random_digest(RandomSource& rng) {
  crypto::Digest d;
  rng.fill(d.bytes);
  return d;
}

crypto::VerifyingKey random_vkey(RandomSource& rng) {
  crypto::VerifyingKey k;
  rng.fill(k.bytes);
  return k;
}

crypto::Signature random_sig(RandomSource& rng) {
  crypto::Signature s;
  rng.fill(s.bytes);
  return s;
}

crypto::DhPublic random_dh(RandomSource& rng) {
  crypto::DhPublic p;
  rng.fill(p.bytes);
  return p;
}

Challenge random_challenge(RandomSource& rng) {
  Challenge c;
  c.verifier_public = random_dh(rng);
  rng.fill(c.nonce);
  return c;
}

AttestationReport random_report(RandomSource& rng) {
  AttestationReport r;
  r.serial_number = rng.next_u64();
  r.fsbl_digest = random_digest(rng);
  r.program_digest = random_digest(rng);
  r.session_public_key.signing = random_vkey(rng);
  r.session_public_key.dh = random_dh(rng);
  r.suite_id = static_cast<std::uint8_t>(rng.next_u64());
  r.device_signature = random_sig(rng);
  return r;
}

RevocationList random_revocations(RandomSource& rng) {
  RevocationList l;
  std::set<crypto::Digest> digests;
  for (std::size_t i = 0; i < rng.next_u64() % 5; ++i) {
    digests.insert(random_digest(rng));
  }
  l.revoked_fsbl_digests.assign(digests.begin(), digests.end());
  std::set<DeviceRecordId> recs;
  for (std::size_t i = 0; i < rng.next_u64() % 5; ++i) {
    recs.insert(DeviceRecordId{rng.next_u64(), random_digest(rng)});
  }
  l.revoked_device_records.assign(recs.begin(), recs.end());
  l.issued_at = rng.next_u64();
  l.signature = random_sig(rng);
  return l;
}

/// One random instance of each message alternative, keyed by index.
Message random_message(std::size_t alternative, RandomSource& rng) {
  switch (alternative % 16) {
    case 0:
      return random_challenge(rng);
    case 1: {
      ChallengeResponse r;
      r.report = random_report(rng);
      r.echoed_challenge = random_challenge(rng);
      r.session_signature = random_sig(rng);
      return r;
    }
    case 2:
      return random_report(rng);
    case 3:
      return SealedMessage{rng.take(rng.next_u64() % 300)};
    case 4:
      return ReleaseFsblRequest{rng.take(rng.next_u64() % 300)};
    case 5:
      return RegisterRequest{rng.next_u64(), random_digest(rng),
                             random_vkey(rng)};
    case 6:
      return LookupRequest{rng.next_u64(), random_digest(rng)};
    case 7: {
      RevokeRequest m;
      if (rng.next_u64() % 2 == 0) {
        m.kind = RevokeKind::kFsbl;
        m.serial_number = 0;
      } else {
        m.kind = RevokeKind::kDevice;
        m.serial_number = rng.next_u64();
      }
      m.fsbl_digest = random_digest(rng);
      return m;
    }
    case 8:
      return GetRevocationsRequest{};
    case 9:
      return ServiceKeyRequest{};
    case 10:
      return AckResponse{};
    case 11:
      return LookupResponse{RegistryRecord{rng.next_u64(), random_digest(rng),
                                           random_vkey(rng),
                                           rng.next_u64() % 2 == 0}};
    case 12:
      return RevocationListResponse{random_revocations(rng)};
    case 13:
      return ServiceKeyResponse{random_vkey(rng)};
    case 14: {
      FsblRelease rel;
      rel.fsbl.code_bytes = rng.take(rng.next_u64() % 300);
      rel.fsbl.public_key = random_vkey(rng);
      rel.fsbl.signature = random_sig(rng);
      rel.version = static_cast<std::uint32_t>(rng.next_u64());
      rel.revoked = rng.next_u64() % 2 == 0;
      return FsblReleaseResponse{rel};
    }
    default: {
      ErrorResponse e;
      e.code = static_cast<WireErrorCode>(1 + rng.next_u64() % 4);
      Bytes text = rng.take(rng.next_u64() % 40);
      for (auto& b : text) b = static_cast<std::uint8_t>('a' + b % 26);
      e.message.assign(text.begin(), text.end());
      return e;
    }
  }
}

}  // namespace

TEST_CASE("every message type round trips through encode/decode") {
  DeterministicRandom rng(100);
  for (std::size_t alt = 0; alt < 16; ++alt) {
    Message m = random_message(alt, rng);
    CAPTURE(alt);
    Bytes framed = encode(m);
    CHECK(decode(as_view(framed)) == m);
  }
}

TEST_CASE("encoding is canonical over random messages") {
  DeterministicRandom rng(101);
  for (std::size_t i = 0; i < 500; ++i) {
    Message m = random_message(i, rng);
    Bytes once = encode(m);
    Bytes twice = encode(decode(as_view(once)));
    CAPTURE(i);
    CHECK(once == twice);
  }
}

TEST_CASE("fixed-layout messages have stable frame sizes") {
  DeterministicRandom rng(102);
  // 4-byte length + opcode, then the body layouts that signatures depend on.
  CHECK(encode(random_challenge(rng)).size() == 4 + 1 + 48);
  CHECK(encode(random_report(rng)).size() == 4 + 1 + 201);
  ChallengeResponse r;
  r.report = random_report(rng);
  r.echoed_challenge = random_challenge(rng);
  r.session_signature = random_sig(rng);
  CHECK(encode(r).size() == 4 + 1 + 313);
}

TEST_CASE("signed byte ranges line up with the body layout") {
  DeterministicRandom rng(103);
  AttestationReport rep = random_report(rng);
  Bytes body = report_body(rep);
  Bytes prefix = report_signed_prefix(rep);
  REQUIRE(body.size() == 201);
  REQUIRE(prefix.size() == 137);
  CHECK(std::equal(prefix.begin(), prefix.end(), body.begin()));

  ChallengeResponse resp;
  resp.report = rep;
  resp.echoed_challenge = random_challenge(rng);
  resp.session_signature = random_sig(rng);
  Bytes portion = response_signed_portion(resp);
  CHECK(portion == concat({as_view(report_body(rep)),
                           as_view(challenge_body(resp.echoed_challenge))}));
}

TEST_CASE("decode rejects trailing bytes") {
  DeterministicRandom rng(104);
  Bytes framed = encode(random_challenge(rng));
  framed.push_back(0x00);
  CHECK_THROWS_AS(decode(as_view(framed)), CodecError);
}

TEST_CASE("decode rejects every truncation") {
  DeterministicRandom rng(105);
  Bytes framed = encode(Message{LookupRequest{7, random_digest(rng)}});
  for (std::size_t keep = 0; keep < framed.size(); ++keep) {
    Bytes cut(framed.begin(), framed.begin() + static_cast<std::ptrdiff_t>(keep));
    CAPTURE(keep);
    CHECK_THROWS_AS(decode(as_view(cut)), CodecError);
  }
}

TEST_CASE("decode rejects unknown opcodes") {
  DeterministicRandom rng(106);
  Bytes framed = encode(random_challenge(rng));
  framed[4] = 0x7f;
  CHECK_THROWS_AS(decode(as_view(framed)), CodecError);
  framed[4] = 0x00;
  CHECK_THROWS_AS(decode(as_view(framed)), CodecError);
}

TEST_CASE("decode rejects non-canonical booleans") {
  DeterministicRandom rng(107);
  LookupResponse resp{RegistryRecord{1, random_digest(rng), random_vkey(rng),
                                     false}};
  Bytes framed = encode(Message{resp});
  framed.back() = 0x02;  // the revoked flag is the final body byte
  CHECK_THROWS_AS(decode(as_view(framed)), CodecError);
}

TEST_CASE("decode rejects digest revocations with nonzero serial") {
  DeterministicRandom rng(108);
  RevokeRequest m;
  m.kind = RevokeKind::kDevice;
  m.serial_number = 99;
  m.fsbl_digest = random_digest(rng);
  Bytes framed = encode(Message{m});
  framed[5] = 0x01;  // flip target kind to digest; serial stays nonzero
  CHECK_THROWS_AS(decode(as_view(framed)), CodecError);
  framed[5] = 0x03;  // out-of-range kind
  CHECK_THROWS_AS(decode(as_view(framed)), CodecError);
}

TEST_CASE("decode rejects unsorted revocation sets") {
  DeterministicRandom rng(109);
  RevocationList l;
  l.revoked_fsbl_digests = {random_digest(rng), random_digest(rng)};
  std::sort(l.revoked_fsbl_digests.begin(), l.revoked_fsbl_digests.end());
  std::swap(l.revoked_fsbl_digests[0], l.revoked_fsbl_digests[1]);
  l.issued_at = 1;
  CHECK_THROWS_AS(decode(as_view(encode(Message{RevocationListResponse{l}}))),
                  CodecError);

  // Duplicates are equally non-canonical.
  RevocationList dup;
  dup.revoked_fsbl_digests = {l.revoked_fsbl_digests[0],
                              l.revoked_fsbl_digests[0]};
  CHECK_THROWS_AS(
      decode(as_view(encode(Message{RevocationListResponse{dup}}))),
      CodecError);
}

TEST_CASE("decode enforces the size cap") {
  Bytes huge(4 + 1 + kMaxMessageSize + 1, 0);
  CHECK_THROWS_AS(decode(as_view(huge)), CodecError);
  CHECK_THROWS_AS(encode(Message{SealedMessage{Bytes(kMaxMessageSize + 1, 0)}}),
                  CodecError);
}

TEST_CASE("frame length field must match the actual frame") {
  DeterministicRandom rng(110);
  Bytes framed = encode(random_challenge(rng));
  framed[3] ^= 0x01;  // corrupt the low byte of the length
  CHECK_THROWS_AS(decode(as_view(framed)), CodecError);
}

TEST_CASE("transcripts round trip framed messages") {
  DeterministicRandom rng(111);
  std::vector<Bytes> msgs = {encode(random_challenge(rng)),
                             encode(random_report(rng)),
                             encode(Message{AckResponse{}})};
  std::string text = to_transcript(msgs);
  CHECK(from_transcript(text) == msgs);
  CHECK(from_transcript("") == std::vector<Bytes>{});
}
