//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/messages.hpp"

#include <algorithm>

#include "tedge/codec.hpp"
#include "tedge/errors.hpp"

namespace tedge::wire {

namespace {

// ---- field helpers ----------------------------------------------------------

void put(Writer& w, const crypto::Digest& d) { w.fixed(d.bytes); }
void put(Writer& w, const crypto::VerifyingKey& k) { w.fixed(k.bytes); }
void put(Writer& w, const crypto::Signature& s) { w.fixed(s.bytes); }
void put(Writer& w, const crypto::DhPublic& p) { w.fixed(p.bytes); }

void put(Writer& w, const SessionPublicKey& k) {
  put(w, k.signing);
  put(w, k.dh);
}

crypto::Digest read_digest(Reader& r) {
  crypto::Digest d;
  d.bytes = r.fixed_array<crypto::kDigestSize>();
  return d;
}

crypto::VerifyingKey read_vkey(Reader& r) {
  crypto::VerifyingKey k;
  k.bytes = r.fixed_array<crypto::kVerifyingKeySize>();
  return k;
}

crypto::Signature read_sig(Reader& r) {
  crypto::Signature s;
  s.bytes = r.fixed_array<crypto::kSignatureSize>();
  return s;
}

crypto::DhPublic read_dh(Reader& r) {
  crypto::DhPublic p;
  p.bytes = r.fixed_array<crypto::kDhPublicSize>();
  return p;
}

SessionPublicKey read_spk(Reader& r) {
  SessionPublicKey k;
  k.signing = read_vkey(r);
  k.dh = read_dh(r);
  return k;
}

// ---- body encoders ----------------------------------------------------------

void write_body(Writer& w, const Challenge& c) {
  put(w, c.verifier_public);
  w.fixed(c.nonce);
}

void write_report_prefix(Writer& w, const AttestationReport& r) {
  w.u64(r.serial_number);
  put(w, r.fsbl_digest);
  put(w, r.program_digest);
  put(w, r.session_public_key);
  w.u8(r.suite_id);
}

void write_body(Writer& w, const AttestationReport& r) {
  write_report_prefix(w, r);
  put(w, r.device_signature);
}

void write_body(Writer& w, const ChallengeResponse& r) {
  write_body(w, r.report);
  write_body(w, r.echoed_challenge);
  put(w, r.session_signature);
}

void write_body(Writer& w, const SealedMessage& m) { w.var(as_view(m.box)); }

void write_body(Writer& w, const RegistryRecord& rec) {
  w.u64(rec.serial_number);
  put(w, rec.fsbl_digest);
  put(w, rec.device_public_key);
  w.u8(rec.revoked ? 1 : 0);
}

void write_body(Writer& w, const FsblImage& img) {
  w.var(as_view(img.code_bytes));
  put(w, img.public_key);
  put(w, img.signature);
}

void write_body(Writer& w, const FsblRelease& rel) {
  write_body(w, rel.fsbl);
  w.u32(rel.version);
  w.u8(rel.revoked ? 1 : 0);
}

void write_unsigned_revocations(Writer& w, const RevocationList& l) {
  w.u32(static_cast<std::uint32_t>(l.revoked_fsbl_digests.size()));
  for (const auto& d : l.revoked_fsbl_digests) put(w, d);
  w.u32(static_cast<std::uint32_t>(l.revoked_device_records.size()));
  for (const auto& rec : l.revoked_device_records) {
    w.u64(rec.serial_number);
    put(w, rec.fsbl_digest);
  }
  w.u64(l.issued_at);
}

void write_body(Writer& w, const RevocationList& l) {
  write_unsigned_revocations(w, l);
  put(w, l.signature);
}

void write_body(Writer& w, const ReleaseFsblRequest& m) {
  w.var(as_view(m.code_bytes));
}

void write_body(Writer& w, const RegisterRequest& m) {
  w.u64(m.serial_number);
  put(w, m.fsbl_digest);
  put(w, m.device_public_key);
}

void write_body(Writer& w, const LookupRequest& m) {
  w.u64(m.serial_number);
  put(w, m.fsbl_digest);
}

void write_body(Writer& w, const RevokeRequest& m) {
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u64(m.serial_number);
  put(w, m.fsbl_digest);
}

void write_body(Writer&, const GetRevocationsRequest&) {}
void write_body(Writer&, const ServiceKeyRequest&) {}
void write_body(Writer&, const AckResponse&) {}

void write_body(Writer& w, const LookupResponse& m) { write_body(w, m.record); }

void write_body(Writer& w, const RevocationListResponse& m) {
  write_body(w, m.list);
}

void write_body(Writer& w, const ServiceKeyResponse& m) {
  put(w, m.service_key);
}

void write_body(Writer& w, const FsblReleaseResponse& m) {
  write_body(w, m.release);
}

void write_body(Writer& w, const ErrorResponse& m) {
  w.u8(static_cast<std::uint8_t>(m.code));
  w.var(as_view(to_bytes(m.message)));
}

// ---- body decoders ----------------------------------------------------------

Challenge read_challenge(Reader& r) {
  Challenge c;
  c.verifier_public = read_dh(r);
  c.nonce = r.fixed_array<kNonceSize>();
  return c;
}

AttestationReport read_report(Reader& r) {
  AttestationReport rep;
  rep.serial_number = r.u64();
  rep.fsbl_digest = read_digest(r);
  rep.program_digest = read_digest(r);
  rep.session_public_key = read_spk(r);
  rep.suite_id = r.u8();
  rep.device_signature = read_sig(r);
  return rep;
}

ChallengeResponse read_response(Reader& r) {
  ChallengeResponse resp;
  resp.report = read_report(r);
  resp.echoed_challenge = read_challenge(r);
  resp.session_signature = read_sig(r);
  return resp;
}

RegistryRecord read_record(Reader& r) {
  RegistryRecord rec;
  rec.serial_number = r.u64();
  rec.fsbl_digest = read_digest(r);
  rec.device_public_key = read_vkey(r);
  rec.revoked = r.boolean();
  return rec;
}

FsblImage read_fsbl_image(Reader& r) {
  FsblImage img;
  ByteView code = r.var();
  img.code_bytes.assign(code.begin(), code.end());
  img.public_key = read_vkey(r);
  img.signature = read_sig(r);
  return img;
}

FsblRelease read_fsbl_release(Reader& r) {
  FsblRelease rel;
  rel.fsbl = read_fsbl_image(r);
  rel.version = r.u32();
  rel.revoked = r.boolean();
  return rel;
}

RevocationList read_revocations(Reader& r) {
  RevocationList l;
  std::uint32_t n_fsbl = r.u32();
  if (static_cast<std::size_t>(n_fsbl) * crypto::kDigestSize > r.remaining()) {
    throw CodecError("truncated message");
  }
  l.revoked_fsbl_digests.reserve(n_fsbl);
  for (std::uint32_t i = 0; i < n_fsbl; ++i) {
    crypto::Digest d = read_digest(r);
    if (i > 0 && !(l.revoked_fsbl_digests.back() < d)) {
      throw CodecError("revocation digests not strictly sorted");
    }
    l.revoked_fsbl_digests.push_back(d);
  }
  std::uint32_t n_dev = r.u32();
  if (static_cast<std::size_t>(n_dev) * (8 + crypto::kDigestSize) >
      r.remaining()) {
    throw CodecError("truncated message");
  }
  l.revoked_device_records.reserve(n_dev);
  for (std::uint32_t i = 0; i < n_dev; ++i) {
    DeviceRecordId rec;
    rec.serial_number = r.u64();
    rec.fsbl_digest = read_digest(r);
    if (i > 0 && !(l.revoked_device_records.back() < rec)) {
      throw CodecError("revocation records not strictly sorted");
    }
    l.revoked_device_records.push_back(rec);
  }
  l.issued_at = r.u64();
  l.signature = read_sig(r);
  return l;
}

Message decode_body(Opcode op, Reader& r) {
  switch (op) {
    case Opcode::kChallenge:
      return read_challenge(r);
    case Opcode::kChallengeResponse:
      return read_response(r);
    case Opcode::kAttestationReport:
      return read_report(r);
    case Opcode::kSealedMessage: {
      SealedMessage m;
      ByteView box = r.var();
      m.box.assign(box.begin(), box.end());
      return m;
    }
    case Opcode::kReleaseFsbl: {
      ReleaseFsblRequest m;
      ByteView code = r.var();
      m.code_bytes.assign(code.begin(), code.end());
      return m;
    }
    case Opcode::kRegisterDevice: {
      RegisterRequest m;
      m.serial_number = r.u64();
      m.fsbl_digest = read_digest(r);
      m.device_public_key = read_vkey(r);
      return m;
    }
    case Opcode::kLookup: {
      LookupRequest m;
      m.serial_number = r.u64();
      m.fsbl_digest = read_digest(r);
      return m;
    }
    case Opcode::kRevoke: {
      RevokeRequest m;
      std::uint8_t kind = r.u8();
      if (kind != static_cast<std::uint8_t>(RevokeKind::kFsbl) &&
          kind != static_cast<std::uint8_t>(RevokeKind::kDevice)) {
        throw CodecError("unknown revocation target kind");
      }
      m.kind = static_cast<RevokeKind>(kind);
      m.serial_number = r.u64();
      if (m.kind == RevokeKind::kFsbl && m.serial_number != 0) {
        throw CodecError("digest revocation must carry a zero serial");
      }
      m.fsbl_digest = read_digest(r);
      return m;
    }
    case Opcode::kGetRevocations:
      return GetRevocationsRequest{};
    case Opcode::kGetServiceKey:
      return ServiceKeyRequest{};
    case Opcode::kAck:
      return AckResponse{};
    case Opcode::kLookupResult:
      return LookupResponse{read_record(r)};
    case Opcode::kRevocations:
      return RevocationListResponse{read_revocations(r)};
    case Opcode::kServiceKey:
      return ServiceKeyResponse{read_vkey(r)};
    case Opcode::kFsblRelease:
      return FsblReleaseResponse{read_fsbl_release(r)};
    case Opcode::kError: {
      ErrorResponse m;
      std::uint8_t code = r.u8();
      if (code < 1 || code > 4) throw CodecError("unknown error code");
      m.code = static_cast<WireErrorCode>(code);
      ByteView msg = r.var();
      m.message.assign(msg.begin(), msg.end());
      return m;
    }
  }
  throw CodecError("unknown opcode");
}

}  // namespace

Opcode opcode_of(const Message& m) {
  struct Visitor {
    Opcode operator()(const Challenge&) { return Opcode::kChallenge; }
    Opcode operator()(const ChallengeResponse&) {
      return Opcode::kChallengeResponse;
    }
    Opcode operator()(const AttestationReport&) {
      return Opcode::kAttestationReport;
    }
    Opcode operator()(const SealedMessage&) { return Opcode::kSealedMessage; }
    Opcode operator()(const ReleaseFsblRequest&) { return Opcode::kReleaseFsbl; }
    Opcode operator()(const RegisterRequest&) {
      return Opcode::kRegisterDevice;
    }
    Opcode operator()(const LookupRequest&) { return Opcode::kLookup; }
    Opcode operator()(const RevokeRequest&) { return Opcode::kRevoke; }
    Opcode operator()(const GetRevocationsRequest&) {
      return Opcode::kGetRevocations;
    }
    Opcode operator()(const ServiceKeyRequest&) {
      return Opcode::kGetServiceKey;
    }
    Opcode operator()(const AckResponse&) { return Opcode::kAck; }
    Opcode operator()(const LookupResponse&) { return Opcode::kLookupResult; }
    Opcode operator()(const RevocationListResponse&) {
      return Opcode::kRevocations;
    }
    Opcode operator()(const ServiceKeyResponse&) { return Opcode::kServiceKey; }
    Opcode operator()(const FsblReleaseResponse&) {
      return Opcode::kFsblRelease;
    }
    Opcode operator()(const ErrorResponse&) { return Opcode::kError; }
  };
  return std::visit(Visitor{}, m);
}

Bytes encode(const Message& m) {
  Writer body;
  std::visit([&body](const auto& msg) { write_body(body, msg); }, m);
  if (body.bytes().size() > kMaxMessageSize) {
    throw CodecError("message exceeds size limit");
  }
  Writer framed;
  framed.u32(static_cast<std::uint32_t>(1 + body.bytes().size()));
  framed.u8(static_cast<std::uint8_t>(opcode_of(m)));
  framed.fixed(as_view(body.bytes()));
  return framed.take();
}

Message decode(ByteView framed) {
  if (framed.size() > 4 + 1 + kMaxMessageSize) {
    throw CodecError("message exceeds size limit");
  }
  Reader frame(framed);
  std::uint32_t len = frame.u32();
  if (len < 1) throw CodecError("frame length below opcode size");
  if (static_cast<std::size_t>(len) != framed.size() - 4) {
    throw CodecError(len > framed.size() - 4 ? "truncated message"
                                             : "trailing bytes after message");
  }
  std::uint8_t op = frame.u8();
  Reader body(frame.fixed(len - 1));
  Message m = decode_body(static_cast<Opcode>(op), body);
  body.expect_end();
  return m;
}

Bytes report_signed_prefix(const AttestationReport& r) {
  Writer w;
  write_report_prefix(w, r);
  return w.take();
}

Bytes report_body(const AttestationReport& r) {
  Writer w;
  write_body(w, r);
  return w.take();
}

Bytes challenge_body(const Challenge& c) {
  Writer w;
  write_body(w, c);
  return w.take();
}

Bytes response_signed_portion(const ChallengeResponse& r) {
  Writer w;
  write_body(w, r.report);
  write_body(w, r.echoed_challenge);
  return w.take();
}

Bytes revocation_signed_body(const RevocationList& l) {
  // Domain label keeps revocation-list signatures distinct from the other
  // payloads the service signs with the same key.
  static constexpr char kLabel[] = "tedge-revocation-v1";
  Writer w;
  w.fixed(ByteView(reinterpret_cast<const std::uint8_t*>(kLabel),
                   sizeof(kLabel) - 1));
  write_unsigned_revocations(w, l);
  return w.take();
}

std::string to_transcript(const std::vector<Bytes>& framed_messages) {
  std::string out;
  for (const Bytes& m : framed_messages) {
    out += to_hex(as_view(m));
    out += '\n';
  }
  return out;
}

std::vector<Bytes> from_transcript(std::string_view text) {
  std::vector<Bytes> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty()) out.push_back(from_hex(line));
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

}  // namespace tedge::wire
