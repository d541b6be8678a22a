//
// Copyright 2026 The tedge Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace tedge {

/// Base of every failure this library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Key or OTP provisioning rejected (bad secret length, double provisioning).
class ProvisioningError : public Error {
 public:
  using Error::Error;
};

/// Operation incompatible with the device's current life-cycle stage.
class LifecycleError : public Error {
 public:
  using Error::Error;
};

/// Secure-channel failure: degenerate DH peer, wrong secret, tampered box.
class ChannelError : public Error {
 public:
  using Error::Error;
};

/// Registry store or wire-protocol level failure (duplicate, unknown target).
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Canonical decoding failed: truncated, trailing bytes, unknown opcode,
/// non-canonical field content, or oversized input.
class CodecError : public Error {
 public:
  using Error::Error;
};

/// Attack-harness script error (unknown field path, unobserved replay index).
class HarnessError : public Error {
 public:
  using Error::Error;
};

/// Simulated transport failed (connection refused, dropped message).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Read of a resource the current world/stage is not allowed to see.
class AccessDeniedError : public Error {
 public:
  using Error::Error;
};

}  // namespace tedge
