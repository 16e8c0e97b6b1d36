// Copyright 2026 The tda Authors
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

namespace tda {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto process exit statuses, tests match on them.
enum class ErrorCode {
  // tensors
  ShapeMismatch,
  InputTooShort,
  BadGrouping,
  NonScalarLoss,
  // audio
  MalformedWav,
  UnsupportedFormat,
  SilentNoise,
  SilentSpeech,
  UnknownCharacter,
  // corpus
  EmptyCorpus,
  MalformedLine,
  DuplicateId,
  MissingKey,
  // checkpoints
  BadMagic,
  VersionMismatch,
  ShapeMismatchOnLoad,
  CorruptCheckpoint,
  // ctc
  UnnormalizedRow,
  TooLargeToEnumerate,
  InvalidTarget,
  // pretraining
  TooFewPoints,
  DimMismatch,
  LengthMismatch,
  // training
  NonFiniteGradient,
  NonFiniteLoss,
  SanityFailed,
  // evaluation
  EmptyReference,
  MissingCondition,
  // generic
  InvalidConfig,
  InvalidText,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tda
