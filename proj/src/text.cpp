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

#include "tda/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "tda/error.hpp"

namespace tda {

std::u32string utf8_to_u32(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const int32_t length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c < 0) throw Error(ErrorCode::InvalidText, "malformed UTF-8");
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

std::string u32_to_utf8(std::u32string_view text) {
  std::string out;
  for (char32_t c : text) out += u32_to_utf8(c);
  return out;
}

std::string u32_to_utf8(char32_t c) {
  uint8_t buf[U8_MAX_LENGTH];
  int32_t n = 0;
  UBool error = false;
  U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
  if (error) throw Error(ErrorCode::InvalidText, "unencodable code point");
  return std::string(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::InvalidText, "ICU NFC unavailable");
  // Validate first: ICU silently substitutes U+FFFD for bad sequences.
  utf8_to_u32(text);
  const icu::UnicodeString source =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  const icu::UnicodeString normalized = normalizer->normalize(source, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::InvalidText, u_errorName(status));
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

std::string collapse_whitespace(std::string_view text) {
  std::u32string out;
  bool pending = false;
  for (char32_t c : utf8_to_u32(text)) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(U' ');
    pending = false;
    out.push_back(c);
  }
  return u32_to_utf8(out);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::u32string current;
  for (char32_t c : utf8_to_u32(text)) {
    if (is_space(c)) {
      if (!current.empty()) words.push_back(u32_to_utf8(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(u32_to_utf8(current));
  return words;
}

}  // namespace tda
