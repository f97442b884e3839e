// Copyright 2026 The Roomprint Authors. All Rights Reserved.
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

#include "roomprint/error.hpp"

namespace roomprint {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSignalTooShort: return "signal too short";
    case ErrorKind::kInsufficientFrames: return "insufficient frames";
    case ErrorKind::kInsufficientData: return "insufficient training data";
    case ErrorKind::kConfigMismatch: return "config mismatch";
    case ErrorKind::kDegenerateTarget: return "degenerate target";
    case ErrorKind::kNoBands: return "no bands in range";
    case ErrorKind::kBandUnresolvable: return "band unresolvable";
    case ErrorKind::kZeroEnergy: return "zero energy";
    case ErrorKind::kInsufficientDecay: return "insufficient decay range";
    case ErrorKind::kInsufficientClassSupport: return "insufficient class support";
    case ErrorKind::kFeatureMismatch: return "feature mismatch";
    case ErrorKind::kUnsupportedFormat: return "unsupported format";
    case ErrorKind::kCorruptFile: return "corrupt file";
    case ErrorKind::kManifestInvalid: return "manifest invalid";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kIo: return "i/o error";
  }
  return "unknown error";
}

namespace {

std::string compose(ErrorKind kind, const std::string& detail) {
  std::string msg = to_string(kind);
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(compose(kind, detail)), kind_(kind) {}

}  // namespace roomprint
