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

// UTF-8 helpers shared by the corpus, synthesizer and scorer. Characters are
// Unicode scalar values after NFC normalization.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tda {

// Throws InvalidText on malformed UTF-8.
std::u32string utf8_to_u32(std::string_view text);
std::string u32_to_utf8(std::u32string_view text);
std::string u32_to_utf8(char32_t c);

std::string nfc(std::string_view text);

bool is_space(char32_t c);

// Trims, and replaces each run of whitespace with a single U+0020.
std::string collapse_whitespace(std::string_view text);

std::vector<std::string> split_words(std::string_view text);

}  // namespace tda
