//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Loopback TCP plumbing for the registry wire protocol.
//

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "tedge/codec.hpp"
#include "tedge/errors.hpp"
#include "tedge/registry.hpp"

namespace tedge::registry {

namespace {

bool read_exact(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool write_all(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r <= 0) return false;
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

/// Reads one length-prefixed frame into out (including the prefix).
/// Returns false on EOF or a frame that cannot be trusted for resync.
bool read_frame(int fd, Bytes& out) {
  std::uint8_t head[4];
  if (!read_exact(fd, head, 4)) return false;
  std::uint32_t len = (static_cast<std::uint32_t>(head[0]) << 24) |
                      (static_cast<std::uint32_t>(head[1]) << 16) |
                      (static_cast<std::uint32_t>(head[2]) << 8) |
                      static_cast<std::uint32_t>(head[3]);
  if (len < 1 || len > 1 + wire::kMaxMessageSize) return false;
  out.assign(head, head + 4);
  out.resize(4 + len);
  return read_exact(fd, out.data() + 4, len);
}

}  // namespace

// ---- RegistryServer ---------------------------------------------------------

RegistryServer::RegistryServer(RegistryService& service, std::uint16_t port)
    : service_(service) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("cannot create listening socket");

  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
          0 ||
      ::listen(listen_fd_, 16) < 0) {
    ::close(listen_fd_);
    throw TransportError("cannot bind registry endpoint");
  }

  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  acceptor_ = std::thread([this] { accept_loop(); });
}

RegistryServer::~RegistryServer() { stop(); }

std::string RegistryServer::address() const {
  return "127.0.0.1:" + std::to_string(port_);
}

void RegistryServer::accept_loop() {
  while (!stopping_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      continue;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void RegistryServer::serve_connection(int fd) {
  Bytes frame;
  while (read_frame(fd, frame)) {
    Bytes reply;
    try {
      wire::Message request = wire::decode(as_view(frame));
      reply = wire::encode(service_.handle(request));
    } catch (const CodecError& e) {
      reply = wire::encode(wire::ErrorResponse{
          wire::WireErrorCode::kBadRequest, e.what()});
    }
    if (!write_all(fd, reply.data(), reply.size())) break;
  }
  ::close(fd);
  std::lock_guard lock(mu_);
  std::erase(client_fds_, fd);
}

void RegistryServer::stop() {
  bool expected = false;
  if (!stopping_.compare_exchange_strong(expected, true)) return;

  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();

  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  // Workers exit once their sockets report EOF.
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (std::thread& t : workers) {
    if (t.joinable()) t.join();
  }
}

// ---- RegistryClient ---------------------------------------------------------

RegistryClient::RegistryClient(const std::string& address) {
  std::size_t colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw TransportError("registry address must be host:port");
  }
  std::string host = address.substr(0, colon);
  if (host == "localhost") host = "127.0.0.1";
  int port = 0;
  try {
    port = std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    throw TransportError("invalid registry port");
  }
  if (port < 1 || port > 65535) throw TransportError("invalid registry port");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("invalid registry host");
  }

  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("cannot create socket");
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd_);
    fd_ = -1;
    throw TransportError("registry unreachable at " + address);
  }
}

RegistryClient::~RegistryClient() {
  if (fd_ >= 0) ::close(fd_);
}

Bytes RegistryClient::round_trip(ByteView framed_request) {
  std::lock_guard lock(mu_);
  if (fd_ < 0) throw TransportError("registry connection closed");
  if (!write_all(fd_, framed_request.data(), framed_request.size())) {
    throw TransportError("registry send failed");
  }
  Bytes reply;
  if (!read_frame(fd_, reply)) {
    throw TransportError("registry connection dropped");
  }
  return reply;
}

}  // namespace tedge::registry
