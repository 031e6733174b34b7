// Copyright 2026 The bevkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bevkd {

enum class ErrorKind {
  BehindCamera,
  NonPositiveDepth,
  OutOfRange,
  ShapeMismatch,
  SpecMismatch,
  UnknownTimestamp,
  MissingObservation,
  MissingState,
  NonFiniteInput,
  InvalidSpec,
  IoFailure,
  ChecksumMismatch,
  UnsupportedVersion,
  CorruptHeader,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SpecMismatch: return "SpecMismatch";
    case ErrorKind::UnknownTimestamp: return "UnknownTimestamp";
    case ErrorKind::MissingObservation: return "MissingObservation";
    case ErrorKind::MissingState: return "MissingState";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::CorruptHeader: return "CorruptHeader";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bevkd
