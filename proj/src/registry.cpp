//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "tedge/registry.hpp"

#include <algorithm>

#include "tedge/codec.hpp"
#include "tedge/errors.hpp"

namespace tedge::registry {

namespace {

// Persistence record kinds. These never travel over the network; they share
// the frame shape (u32 length ‖ kind ‖ body) with the wire protocol.
constexpr std::uint8_t kLogKeys = 0x50;
constexpr std::uint8_t kLogRelease = 0x51;
constexpr std::uint8_t kLogRegister = 0x52;
constexpr std::uint8_t kLogRevokeFsbl = 0x53;
constexpr std::uint8_t kLogRevokeDevice = 0x54;

template <typename T>
void insert_sorted_unique(std::vector<T>& v, const T& value) {
  auto it = std::lower_bound(v.begin(), v.end(), value);
  if (it == v.end() || *it != value) v.insert(it, value);
}

}  // namespace

RegistryService::RegistryService(const std::filesystem::path& log_path,
                                 RandomSource& rng) {
  load_log(log_path, rng);
}

void RegistryService::load_log(const std::filesystem::path& log_path,
                               RandomSource& rng) {
  Bytes existing;
  {
    std::ifstream in(log_path, std::ios::binary);
    if (in) {
      existing.assign(std::istreambuf_iterator<char>(in),
                      std::istreambuf_iterator<char>());
    }
  }

  current_revocations_.issued_at = 0;

  if (existing.empty()) {
    keys_ = crypto::generate_signing_keypair(rng);
    resign_revocations();
    log_.open(log_path, std::ios::binary | std::ios::trunc);
    if (!log_) throw RegistryError("cannot open registry log for writing");
    wire::Writer w;
    w.fixed(keys_.private_key);
    w.fixed(keys_.public_key.bytes);
    append_log(kLogKeys, w.take());
    return;
  }

  // Replay. The first record must be the service keys; every later record is
  // re-applied through the normal operations with writing suppressed.
  replaying_ = true;
  ByteView view = as_view(existing);
  std::size_t pos = 0;
  bool have_keys = false;
  while (pos < view.size()) {
    if (view.size() - pos < 5) throw RegistryError("corrupt registry log");
    wire::Reader head(view.subspan(pos, 5));
    std::uint32_t len = head.u32();
    std::uint8_t kind = head.u8();
    if (len < 1 || view.size() - pos - 4 < len) {
      throw RegistryError("corrupt registry log");
    }
    wire::Reader body(view.subspan(pos + 5, len - 1));
    pos += 4 + len;

    switch (kind) {
      case kLogKeys: {
        keys_.private_key = body.fixed_array<crypto::kSigningPrivateSize>();
        keys_.public_key.bytes = body.fixed_array<crypto::kVerifyingKeySize>();
        have_keys = true;
        resign_revocations();  // the initial empty list at issued_at 0
        break;
      }
      case kLogRelease: {
        ByteView code = body.var();
        release_fsbl(code);
        break;
      }
      case kLogRegister: {
        std::uint64_t serial = body.u64();
        crypto::Digest digest;
        digest.bytes = body.fixed_array<crypto::kDigestSize>();
        crypto::VerifyingKey key;
        key.bytes = body.fixed_array<crypto::kVerifyingKeySize>();
        register_device(serial, digest, key);
        break;
      }
      case kLogRevokeFsbl: {
        crypto::Digest digest;
        digest.bytes = body.fixed_array<crypto::kDigestSize>();
        revoke_fsbl(digest);
        break;
      }
      case kLogRevokeDevice: {
        std::uint64_t serial = body.u64();
        crypto::Digest digest;
        digest.bytes = body.fixed_array<crypto::kDigestSize>();
        revoke_device(serial, digest);
        break;
      }
      default:
        throw RegistryError("corrupt registry log");
    }
    body.expect_end();
    if (!have_keys) throw RegistryError("registry log missing service keys");
  }
  replaying_ = false;
  if (!have_keys) throw RegistryError("registry log missing service keys");

  log_.open(log_path, std::ios::binary | std::ios::app);
  if (!log_) throw RegistryError("cannot open registry log for writing");
}

void RegistryService::append_log(std::uint8_t record_kind, const Bytes& body) {
  if (replaying_) return;
  wire::Writer frame;
  frame.u32(static_cast<std::uint32_t>(1 + body.size()));
  frame.u8(record_kind);
  frame.fixed(as_view(body));
  const Bytes& bytes = frame.bytes();
  log_.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  log_.flush();
  if (!log_) throw RegistryError("registry log write failed");
}

void RegistryService::resign_revocations() {
  current_revocations_.signature = crypto::sign(
      keys_, as_view(wire::revocation_signed_body(current_revocations_)));
}

crypto::Digest RegistryService::boot_key_hash() const {
  return crypto::hash(ByteView(keys_.public_key.bytes));
}

wire::FsblRelease RegistryService::release_fsbl(ByteView code_bytes) {
  std::unique_lock lock(mu_);
  wire::FsblRelease rel;
  rel.fsbl.code_bytes.assign(code_bytes.begin(), code_bytes.end());
  rel.fsbl.public_key = keys_.public_key;
  rel.fsbl.signature = crypto::sign(keys_, code_bytes);
  rel.version = static_cast<std::uint32_t>(releases_.size() + 1);
  rel.revoked = false;
  releases_.push_back(rel);

  wire::Writer w;
  w.var(code_bytes);
  append_log(kLogRelease, w.take());
  return rel;
}

wire::RegistryRecord RegistryService::register_device(
    std::uint64_t serial_number, const crypto::Digest& fsbl_digest,
    const crypto::VerifyingKey& device_public_key) {
  std::unique_lock lock(mu_);
  wire::DeviceRecordId id{serial_number, fsbl_digest};
  if (records_.contains(id)) {
    throw RegistryError("binding already registered for this serial/digest");
  }
  wire::RegistryRecord rec{serial_number, fsbl_digest, device_public_key,
                           false};
  records_.emplace(id, rec);

  wire::Writer w;
  w.u64(serial_number);
  w.fixed(fsbl_digest.bytes);
  w.fixed(device_public_key.bytes);
  append_log(kLogRegister, w.take());
  return rec;
}

std::optional<wire::RegistryRecord> RegistryService::lookup(
    std::uint64_t serial_number, const crypto::Digest& fsbl_digest) {
  std::unique_lock lock(mu_);
  // The audit entry records the query itself — identity and bootloader
  // version only; program measurements never reach this service.
  audit_.push_back(AuditEntry{serial_number, fsbl_digest});
  auto it = records_.find(wire::DeviceRecordId{serial_number, fsbl_digest});
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

wire::RevocationList RegistryService::revoke_fsbl(
    const crypto::Digest& fsbl_digest) {
  std::unique_lock lock(mu_);
  bool known = std::any_of(releases_.begin(), releases_.end(),
                           [&](const wire::FsblRelease& rel) {
                             return crypto::hash(as_view(
                                        rel.fsbl.code_bytes)) == fsbl_digest;
                           });
  if (!known) throw RegistryError("unknown bootloader digest");

  for (wire::FsblRelease& rel : releases_) {
    if (crypto::hash(as_view(rel.fsbl.code_bytes)) == fsbl_digest) {
      rel.revoked = true;
    }
  }
  insert_sorted_unique(current_revocations_.revoked_fsbl_digests, fsbl_digest);
  ++current_revocations_.issued_at;
  resign_revocations();

  wire::Writer w;
  w.fixed(fsbl_digest.bytes);
  append_log(kLogRevokeFsbl, w.take());
  return current_revocations_;
}

wire::RevocationList RegistryService::revoke_device(
    std::uint64_t serial_number, const crypto::Digest& fsbl_digest) {
  std::unique_lock lock(mu_);
  wire::DeviceRecordId id{serial_number, fsbl_digest};
  auto it = records_.find(id);
  if (it == records_.end()) throw RegistryError("unknown device record");

  it->second.revoked = true;
  insert_sorted_unique(current_revocations_.revoked_device_records, id);
  ++current_revocations_.issued_at;
  resign_revocations();

  wire::Writer w;
  w.u64(serial_number);
  w.fixed(fsbl_digest.bytes);
  append_log(kLogRevokeDevice, w.take());
  return current_revocations_;
}

wire::RevocationList RegistryService::revocations() const {
  std::shared_lock lock(mu_);
  return current_revocations_;
}

std::vector<wire::FsblRelease> RegistryService::releases() const {
  std::shared_lock lock(mu_);
  return releases_;
}

std::vector<RegistryService::AuditEntry> RegistryService::audit_entries()
    const {
  std::shared_lock lock(mu_);
  return audit_;
}

Bytes RegistryService::audit_bytes() const {
  std::shared_lock lock(mu_);
  wire::Writer w;
  for (const AuditEntry& e : audit_) {
    w.u64(e.serial_number);
    w.fixed(e.fsbl_digest.bytes);
  }
  return w.take();
}

wire::Message RegistryService::handle(const wire::Message& request) {
  using wire::ErrorResponse;
  using wire::WireErrorCode;

  if (auto* rel = std::get_if<wire::ReleaseFsblRequest>(&request)) {
    return wire::FsblReleaseResponse{release_fsbl(as_view(rel->code_bytes))};
  }
  if (auto* reg = std::get_if<wire::RegisterRequest>(&request)) {
    try {
      register_device(reg->serial_number, reg->fsbl_digest,
                      reg->device_public_key);
      return wire::AckResponse{};
    } catch (const RegistryError& e) {
      return ErrorResponse{WireErrorCode::kDuplicate, e.what()};
    }
  }
  if (auto* look = std::get_if<wire::LookupRequest>(&request)) {
    if (auto rec = lookup(look->serial_number, look->fsbl_digest)) {
      return wire::LookupResponse{*rec};
    }
    return ErrorResponse{WireErrorCode::kNotFound, "no such binding"};
  }
  if (auto* rev = std::get_if<wire::RevokeRequest>(&request)) {
    try {
      if (rev->kind == wire::RevokeKind::kFsbl) {
        return wire::RevocationListResponse{revoke_fsbl(rev->fsbl_digest)};
      }
      return wire::RevocationListResponse{
          revoke_device(rev->serial_number, rev->fsbl_digest)};
    } catch (const RegistryError& e) {
      return ErrorResponse{WireErrorCode::kUnknownTarget, e.what()};
    }
  }
  if (std::holds_alternative<wire::GetRevocationsRequest>(request)) {
    return wire::RevocationListResponse{revocations()};
  }
  if (std::holds_alternative<wire::ServiceKeyRequest>(request)) {
    return wire::ServiceKeyResponse{service_key()};
  }
  return ErrorResponse{WireErrorCode::kBadRequest,
                       "not a registry request"};
}

Bytes LocalRegistry::round_trip(ByteView framed_request) {
  wire::Message request;
  try {
    request = wire::decode(framed_request);
  } catch (const CodecError& e) {
    return wire::encode(
        wire::ErrorResponse{wire::WireErrorCode::kBadRequest, e.what()});
  }
  return wire::encode(service_.handle(request));
}

// ---- RegistryView -----------------------------------------------------------

wire::Message RegistryView::exchange(const wire::Message& request) {
  Bytes reply = transport_.round_trip(as_view(wire::encode(request)));
  return wire::decode(as_view(reply));
}

crypto::VerifyingKey RegistryView::service_key() {
  wire::Message m = exchange(wire::ServiceKeyRequest{});
  if (auto* resp = std::get_if<wire::ServiceKeyResponse>(&m)) {
    return resp->service_key;
  }
  throw RegistryError("unexpected response to service key request");
}

wire::FsblRelease RegistryView::release_fsbl(ByteView code_bytes) {
  wire::ReleaseFsblRequest req;
  req.code_bytes.assign(code_bytes.begin(), code_bytes.end());
  wire::Message m = exchange(req);
  if (auto* resp = std::get_if<wire::FsblReleaseResponse>(&m)) {
    return resp->release;
  }
  throw RegistryError("unexpected response to release request");
}

void RegistryView::register_device(std::uint64_t serial_number,
                                   const crypto::Digest& fsbl_digest,
                                   const crypto::VerifyingKey& key) {
  wire::Message m =
      exchange(wire::RegisterRequest{serial_number, fsbl_digest, key});
  if (std::holds_alternative<wire::AckResponse>(m)) return;
  if (auto* err = std::get_if<wire::ErrorResponse>(&m)) {
    throw RegistryError(err->message);
  }
  throw RegistryError("unexpected response to register request");
}

std::optional<wire::RegistryRecord> RegistryView::lookup(
    std::uint64_t serial_number, const crypto::Digest& fsbl_digest) {
  wire::Message m = exchange(wire::LookupRequest{serial_number, fsbl_digest});
  if (auto* resp = std::get_if<wire::LookupResponse>(&m)) {
    return resp->record;
  }
  if (auto* err = std::get_if<wire::ErrorResponse>(&m)) {
    if (err->code == wire::WireErrorCode::kNotFound) return std::nullopt;
    throw RegistryError(err->message);
  }
  throw RegistryError("unexpected response to lookup request");
}

namespace {

wire::RevocationList expect_revocations(wire::Message m) {
  if (auto* resp = std::get_if<wire::RevocationListResponse>(&m)) {
    return resp->list;
  }
  if (auto* err = std::get_if<wire::ErrorResponse>(&m)) {
    throw RegistryError(err->message);
  }
  throw RegistryError("unexpected response to revocation request");
}

}  // namespace

wire::RevocationList RegistryView::revoke_fsbl(
    const crypto::Digest& fsbl_digest) {
  return expect_revocations(
      exchange(wire::RevokeRequest{wire::RevokeKind::kFsbl, 0, fsbl_digest}));
}

wire::RevocationList RegistryView::revoke_device(
    std::uint64_t serial_number, const crypto::Digest& fsbl_digest) {
  return expect_revocations(exchange(wire::RevokeRequest{
      wire::RevokeKind::kDevice, serial_number, fsbl_digest}));
}

wire::RevocationList RegistryView::revocations() {
  return expect_revocations(exchange(wire::GetRevocationsRequest{}));
}

}  // namespace tedge::registry
