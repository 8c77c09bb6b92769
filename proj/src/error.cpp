/* Copyright 2026 The SpecVerify Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "specverify/error.hpp"

namespace specverify {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroMass:
      return "ZeroMass";
    case ErrorCode::kVocabMismatch:
      return "VocabMismatch";
    case ErrorCode::kInvalidDist:
      return "InvalidDist";
    case ErrorCode::kTokenOutOfRange:
      return "TokenOutOfRange";
    case ErrorCode::kBadConfig:
      return "BadConfig";
    case ErrorCode::kInsufficientSupport:
      return "InsufficientSupport";
    case ErrorCode::kExplosionCap:
      return "ExplosionCap";
    case ErrorCode::kBadSample:
      return "BadSample";
    case ErrorCode::kBadToken:
      return "BadToken";
    case ErrorCode::kNoAcceptance:
      return "NoAcceptance";
    case ErrorCode::kInternalNumerical:
      return "InternalNumericalError";
    case ErrorCode::kExactModeUnavailable:
      return "ExactModeUnavailable";
  }
  return "Unknown";
}

}  // namespace specverify
