//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// The provisioning service: signs bootloader releases, publishes
// (serial, bootloader digest) → device-key bindings, and serves signed,
// monotone revocation lists. State is an append-only log replayed at startup.
// A small TCP server speaks the framed wire protocol on loopback; RegistryView
// gives typed access over any Transport so tests can interpose.
//

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "tedge/bytes.hpp"
#include "tedge/crypto.hpp"
#include "tedge/messages.hpp"
#include "tedge/protocol.hpp"
#include "tedge/rng.hpp"

namespace tedge::registry {

class RegistryService {
 public:
  /// Opens (or creates) the log at log_path. A fresh log mints the service
  /// signing keypair from rng and persists it as the first record; an
  /// existing log restores keys and replays every operation.
  RegistryService(const std::filesystem::path& log_path, RandomSource& rng);

  const crypto::VerifyingKey& service_key() const { return keys_.public_key; }

  /// hash(service public key) — the value burned into device OTP.
  crypto::Digest boot_key_hash() const;

  /// Sign code_bytes as the next bootloader version.
  wire::FsblRelease release_fsbl(ByteView code_bytes);

  /// Publish a key binding. Throws RegistryError if (serial, digest) exists.
  wire::RegistryRecord register_device(
      std::uint64_t serial_number, const crypto::Digest& fsbl_digest,
      const crypto::VerifyingKey& device_public_key);

  /// Query one binding. Every call appends (serial, digest) — and nothing
  /// else — to the privacy audit log.
  std::optional<wire::RegistryRecord> lookup(std::uint64_t serial_number,
                                             const crypto::Digest& fsbl_digest);

  /// Revocations: the target must exist; repeated revocation is idempotent on
  /// the sets but still advances issued_at. Returns the freshly signed list.
  wire::RevocationList revoke_fsbl(const crypto::Digest& fsbl_digest);
  wire::RevocationList revoke_device(std::uint64_t serial_number,
                                     const crypto::Digest& fsbl_digest);

  wire::RevocationList revocations() const;
  std::vector<wire::FsblRelease> releases() const;

  struct AuditEntry {
    std::uint64_t serial_number = 0;
    crypto::Digest fsbl_digest;
  };
  std::vector<AuditEntry> audit_entries() const;
  /// Serialized audit log, for byte-scans in privacy tests.
  Bytes audit_bytes() const;

  /// Wire-level dispatch: one decoded request to one response message.
  /// Registry failures become ErrorResponse, never exceptions.
  wire::Message handle(const wire::Message& request);

 private:
  void append_log(std::uint8_t record_kind, const Bytes& body);
  void load_log(const std::filesystem::path& log_path, RandomSource& rng);
  void resign_revocations();

  mutable std::shared_mutex mu_;
  crypto::SigningKeypair keys_;
  std::map<wire::DeviceRecordId, wire::RegistryRecord> records_;
  std::vector<wire::FsblRelease> releases_;
  wire::RevocationList current_revocations_;
  std::vector<AuditEntry> audit_;
  std::ofstream log_;
  bool replaying_ = false;
};

/// In-process Transport over a RegistryService, bypassing sockets. Behaves
/// exactly like one server connection: malformed frames earn BadRequest.
class LocalRegistry : public proto::Transport {
 public:
  explicit LocalRegistry(RegistryService& service) : service_(service) {}

  Bytes round_trip(ByteView framed_request) override;

 private:
  RegistryService& service_;
};

/// Loopback TCP server: one thread per connection, each handling framed
/// request/response pairs until the peer disconnects.
class RegistryServer {
 public:
  /// Binds 127.0.0.1:port (port 0 picks a free one) and starts serving.
  RegistryServer(RegistryService& service, std::uint16_t port = 0);
  ~RegistryServer();

  std::uint16_t port() const { return port_; }
  std::string address() const;

  void stop();

 private:
  void accept_loop();
  void serve_connection(int fd);

  RegistryService& service_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
  std::atomic<bool> stopping_{false};
};

/// Client side of the wire protocol: one persistent connection, usable as a
/// Transport so the attack harness can sit in front of it.
class RegistryClient : public proto::Transport {
 public:
  /// address is "host:port". Throws TransportError when unreachable.
  explicit RegistryClient(const std::string& address);
  ~RegistryClient() override;

  RegistryClient(const RegistryClient&) = delete;
  RegistryClient& operator=(const RegistryClient&) = delete;

  Bytes round_trip(ByteView framed_request) override;

 private:
  std::mutex mu_;
  int fd_ = -1;
};

/// Typed request helpers over any Transport. Error responses surface as
/// RegistryError except NotFound, which is part of the lookup result type.
class RegistryView {
 public:
  explicit RegistryView(proto::Transport& transport) : transport_(transport) {}

  crypto::VerifyingKey service_key();
  wire::FsblRelease release_fsbl(ByteView code_bytes);
  void register_device(std::uint64_t serial_number,
                       const crypto::Digest& fsbl_digest,
                       const crypto::VerifyingKey& device_public_key);
  std::optional<wire::RegistryRecord> lookup(std::uint64_t serial_number,
                                             const crypto::Digest& fsbl_digest);
  wire::RevocationList revoke_fsbl(const crypto::Digest& fsbl_digest);
  wire::RevocationList revoke_device(std::uint64_t serial_number,
                                     const crypto::Digest& fsbl_digest);
  wire::RevocationList revocations();

 private:
  wire::Message exchange(const wire::Message& request);

  proto::Transport& transport_;
};

}  // namespace tedge::registry
