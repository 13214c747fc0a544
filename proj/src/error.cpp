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

#include "csdet/error.hpp"

namespace csdet {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidName: return "InvalidName";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kMultipleParents: return "MultipleParents";
    case ErrorCode::kMultipleRoots: return "MultipleRoots";
    case ErrorCode::kDuplicateEdge: return "DuplicateEdge";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kMissingScore: return "MissingScore";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kNotALeaf: return "NotALeaf";
    case ErrorCode::kEmptyConfig: return "EmptyConfig";
    case ErrorCode::kDegenerateBox: return "DegenerateBox";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kMissingRaster: return "MissingRaster";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kUnfilteredAncestorLabel: return "UnfilteredAncestorLabel";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDimMismatch: return "DimMismatch";
  }
  return "Unknown";
}

}  // namespace csdet
