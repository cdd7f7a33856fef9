// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gs4d {

/// Distinguishes failure modes so callers (and tests) can branch on them
/// without string matching.
enum class ErrorKind {
  DegenerateRotation,
  BehindCamera,
  Shape,
  Parameter,
  InconsistentState,
  Protocol,
  BadMagic,
  VersionMismatch,
  Checksum,
  Truncated,
  Gap,
  MissingFile,
  NonRigidPose,
  RaggedFrames,
  Input,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace gs4d
