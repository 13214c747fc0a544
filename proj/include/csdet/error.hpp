/*
 * Copyright 2026 The csdet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace csdet {

enum class ErrorCode {
  // taxonomy
  kEmptyInput,
  kInvalidName,
  kCycleDetected,
  kMultipleParents,
  kMultipleRoots,
  kDuplicateEdge,
  kLengthMismatch,
  kMissingScore,
  kUnknownCategory,
  kNotALeaf,
  // geometry / features
  kEmptyConfig,
  kDegenerateBox,
  // data
  kConfigInvalid,
  kFormatError,
  kMissingRaster,
  kIoError,
  // learning
  kLabelOutOfRange,
  kEmptyBatch,
  kUnfilteredAncestorLabel,
  kEmptyPool,
  kNonFiniteLoss,
  kDimMismatch,
};

const char* to_string(ErrorCode code);

// All recoverable failures in the library are reported with this type. The
// message is prefixed with the code name so CLI output stays greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace csdet
