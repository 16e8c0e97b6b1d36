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

#include "tda/error.hpp"

namespace tda {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch:
      return "ShapeMismatch";
    case ErrorCode::InputTooShort:
      return "InputTooShort";
    case ErrorCode::BadGrouping:
      return "BadGrouping";
    case ErrorCode::NonScalarLoss:
      return "NonScalarLoss";
    case ErrorCode::MalformedWav:
      return "MalformedWav";
    case ErrorCode::UnsupportedFormat:
      return "UnsupportedFormat";
    case ErrorCode::SilentNoise:
      return "SilentNoise";
    case ErrorCode::SilentSpeech:
      return "SilentSpeech";
    case ErrorCode::UnknownCharacter:
      return "UnknownCharacter";
    case ErrorCode::EmptyCorpus:
      return "EmptyCorpus";
    case ErrorCode::MalformedLine:
      return "MalformedLine";
    case ErrorCode::DuplicateId:
      return "DuplicateId";
    case ErrorCode::MissingKey:
      return "MissingKey";
    case ErrorCode::BadMagic:
      return "BadMagic";
    case ErrorCode::VersionMismatch:
      return "VersionMismatch";
    case ErrorCode::ShapeMismatchOnLoad:
      return "ShapeMismatchOnLoad";
    case ErrorCode::CorruptCheckpoint:
      return "CorruptCheckpoint";
    case ErrorCode::UnnormalizedRow:
      return "UnnormalizedRow";
    case ErrorCode::TooLargeToEnumerate:
      return "TooLargeToEnumerate";
    case ErrorCode::InvalidTarget:
      return "InvalidTarget";
    case ErrorCode::TooFewPoints:
      return "TooFewPoints";
    case ErrorCode::DimMismatch:
      return "DimMismatch";
    case ErrorCode::LengthMismatch:
      return "LengthMismatch";
    case ErrorCode::NonFiniteGradient:
      return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss:
      return "NonFiniteLoss";
    case ErrorCode::SanityFailed:
      return "SanityFailed";
    case ErrorCode::EmptyReference:
      return "EmptyReference";
    case ErrorCode::MissingCondition:
      return "MissingCondition";
    case ErrorCode::InvalidConfig:
      return "InvalidConfig";
    case ErrorCode::InvalidText:
      return "InvalidText";
    case ErrorCode::IoError:
      return "IoError";
  }
  return "UnknownError";
}

}  // namespace tda
