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

// Utterance manifests (JSON-Lines), the character vocabulary, batching and
// the synthetic two-dialect corpus.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tda/audio.hpp"
#include "tda/rng.hpp"

namespace tda {

struct Utterance {
  std::string id;
  std::string audio;  // path relative to the manifest's directory
  std::string text;   // NFC
  std::string dialect;
  std::string split;  // train | dev | test

  bool operator==(const Utterance&) const = default;
};

bool is_valid_split(std::string_view split);

// Throws MalformedLine (with 1-based line number), MissingKey, DuplicateId,
// IoError.
std::vector<Utterance> load_manifest(const std::filesystem::path& path);
std::vector<Utterance> parse_manifest(std::string_view content);
void save_manifest(const std::vector<Utterance>& utts, const std::filesystem::path& path);
std::string format_manifest(const std::vector<Utterance>& utts);

std::vector<Utterance> filter_split(const std::vector<Utterance>& utts, std::string_view split);

inline constexpr int kBlank = 0;

class Vocabulary {
 public:
  Vocabulary() = default;
  // symbols[0] is ignored and replaced by the blank placeholder.
  explicit Vocabulary(std::u32string symbols);

  // Blank plus every character of the transcripts, sorted by code point.
  // EmptyCorpus when there are no transcripts.
  static Vocabulary build(const std::vector<std::string>& transcripts);
  static Vocabulary build(const std::vector<std::vector<Utterance>>& manifests);

  std::size_t size() const { return symbols_.size(); }
  const std::u32string& symbols() const { return symbols_; }

  bool contains(char32_t c) const;
  int id_of(char32_t c) const;  // UnknownCharacter when absent

  // UnknownCharacter for characters outside the vocabulary.
  std::vector<int> encode(std::string_view text) const;
  // Blank ids are skipped.
  std::string decode(const std::vector<int>& ids) const;

  // Vocabulary symbols as UTF-8 strings, blank first as "".
  std::vector<std::string> to_strings() const;
  static Vocabulary from_strings(const std::vector<std::string>& symbols);

  bool operator==(const Vocabulary&) const = default;

 private:
  std::u32string symbols_;
  std::map<char32_t, int> index_;
};

// A manifest entry with its audio loaded and transcript encoded.
struct Example {
  Utterance utt;
  Waveform wave;
  std::vector<int> target;
};

std::vector<Example> load_examples(const std::filesystem::path& manifest_path,
                                   const std::vector<Utterance>& utts, const Vocabulary& vocab);

struct Batch {
  std::vector<std::size_t> indices;  // into the example list
  std::vector<std::string> ids;
  std::vector<float> audio;  // [size() x max_audio_length], zero padded
  std::size_t max_audio_length = 0;
  std::vector<std::size_t> audio_lengths;
  std::vector<std::vector<int>> targets;  // ragged

  std::size_t size() const { return indices.size(); }
};

// Shuffled index partition into chunks of batch_size; the last one may be
// short.
std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size, Rng& rng);

std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t batch_size,
                                Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic corpus.

struct SplitCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

struct ToyCorpusConfig {
  std::vector<std::string> lexicon;
  // dialect tag -> (standard word -> dialect word)
  std::map<std::string, std::map<std::string, std::string>> dialect_substitutions;
  // dialect tag -> accent factor; the standard dialect uses 1.0
  std::map<std::string, double> accent_factors;
  SplitCounts standard_counts{240, 24, 24};
  SplitCounts dialect_counts{120, 24, 40};
  std::size_t min_words = 2;
  std::size_t max_words = 3;
  double min_pitch = 100.0;  // per-utterance speaker pitch range, Hz
  double max_pitch = 150.0;
  std::uint64_t seed = 1234;

  // InvalidConfig on empty lexicon, zero counts, bad word ranges, or
  // characters outside the synthesizer alphabet.
  void validate() const;
};

inline constexpr std::string_view kStandardDialect = "std";

// 40 words over the synthesizer alphabet, two dialects "A" and "B"
// substituting ten words each with accent factors 1.12 and 0.90.
ToyCorpusConfig default_toy_corpus_config();

// Applies the dialect's word substitutions.
std::string apply_substitutions(std::string_view sentence,
                                const std::map<std::string, std::string>& subs);

struct ToyCorpus {
  std::vector<Utterance> standard;  // written to std.jsonl
  std::vector<Utterance> dialect;   // written to dialect.jsonl
};

inline constexpr std::string_view kStandardManifest = "std.jsonl";
inline constexpr std::string_view kDialectManifest = "dialect.jsonl";

// Writes std.jsonl, dialect.jsonl and wav/<id>.wav under out_dir.
ToyCorpus gen_toy_corpus(const ToyCorpusConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace tda
