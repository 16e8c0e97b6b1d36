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

#include "tda/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tda/error.hpp"
#include "tda/text.hpp"

namespace tda {

namespace {

using nlohmann::json;

constexpr const char* kKeys[] = {"id", "audio", "text", "dialect", "split"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

bool is_valid_split(std::string_view split) {
  return split == "train" || split == "dev" || split == "test";
}

std::vector<Utterance> parse_manifest(std::string_view content) {
  std::vector<Utterance> utts;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const std::size_t end = std::min(content.find('\n', pos), content.size());
    const std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::MalformedLine, where + ": " + e.what());
    }
    if (!obj.is_object()) throw Error(ErrorCode::MalformedLine, where + ": not a JSON object");
    std::string fields[5];
    for (int k = 0; k < 5; ++k) {
      const auto it = obj.find(kKeys[k]);
      if (it == obj.end()) throw Error(ErrorCode::MissingKey, where + ": \"" + kKeys[k] + "\"");
      if (!it->is_string()) {
        throw Error(ErrorCode::MalformedLine, where + ": \"" + kKeys[k] + "\" is not a string");
      }
      fields[k] = it->get<std::string>();
    }
    Utterance u{fields[0], fields[1], collapse_whitespace(nfc(fields[2])), fields[3], fields[4]};
    if (u.id.empty()) throw Error(ErrorCode::MalformedLine, where + ": empty id");
    if (u.text.empty()) throw Error(ErrorCode::MalformedLine, where + ": empty text");
    if (!is_valid_split(u.split)) {
      throw Error(ErrorCode::MalformedLine, where + ": unknown split \"" + u.split + "\"");
    }
    if (!seen.insert(u.id).second) throw Error(ErrorCode::DuplicateId, u.id);
    utts.push_back(std::move(u));
  }
  return utts;
}

std::vector<Utterance> load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path));
}

std::string format_manifest(const std::vector<Utterance>& utts) {
  std::string out;
  for (const Utterance& u : utts) {
    const json obj = {{"id", u.id}, {"audio", u.audio}, {"text", u.text}, {"dialect", u.dialect},
                      {"split", u.split}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const std::vector<Utterance>& utts, const std::filesystem::path& path) {
  write_file(path, format_manifest(utts));
}

std::vector<Utterance> filter_split(const std::vector<Utterance>& utts, std::string_view split) {
  std::vector<Utterance> out;
  std::copy_if(utts.begin(), utts.end(), std::back_inserter(out),
               [&](const Utterance& u) { return u.split == split; });
  return out;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::u32string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) symbols_.push_back(U'\0');
  symbols_[0] = U'\0';
  for (std::size_t i = 1; i < symbols_.size(); ++i) {
    if (symbols_[i] == U'\0' || !index_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::InvalidConfig, "vocabulary symbols must be distinct and non-null");
    }
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& transcripts) {
  if (transcripts.empty()) throw Error(ErrorCode::EmptyCorpus, "no transcripts");
  std::set<char32_t> chars;
  for (const std::string& t : transcripts) {
    for (char32_t c : utf8_to_u32(collapse_whitespace(nfc(t)))) chars.insert(c);
  }
  std::u32string symbols(1, U'\0');
  symbols.append(chars.begin(), chars.end());
  return Vocabulary(std::move(symbols));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<Utterance>>& manifests) {
  std::vector<std::string> texts;
  for (const auto& m : manifests) {
    for (const Utterance& u : m) texts.push_back(u.text);
  }
  return build(texts);
}

bool Vocabulary::contains(char32_t c) const { return index_.contains(c); }

int Vocabulary::id_of(char32_t c) const {
  const auto it = index_.find(c);
  if (it == index_.end()) {
    throw Error(ErrorCode::UnknownCharacter, "'" + u32_to_utf8(c) + "' is not in the vocabulary");
  }
  return it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (char32_t c : utf8_to_u32(collapse_whitespace(nfc(text)))) ids.push_back(id_of(c));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::u32string out;
  for (int id : ids) {
    if (id == kBlank) continue;
    if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
      throw Error(ErrorCode::InvalidTarget, "label id " + std::to_string(id) + " out of range");
    }
    out.push_back(symbols_[static_cast<std::size_t>(id)]);
  }
  return u32_to_utf8(out);
}

std::vector<std::string> Vocabulary::to_strings() const {
  std::vector<std::string> out{""};
  for (std::size_t i = 1; i < symbols_.size(); ++i) out.push_back(u32_to_utf8(symbols_[i]));
  return out;
}

Vocabulary Vocabulary::from_strings(const std::vector<std::string>& symbols) {
  std::u32string s(1, U'\0');
  for (std::size_t i = 1; i < symbols.size(); ++i) {
    const std::u32string c = utf8_to_u32(symbols[i]);
    if (c.size() != 1) throw Error(ErrorCode::InvalidConfig, "vocabulary entry is not one character");
    s.push_back(c[0]);
  }
  return Vocabulary(std::move(s));
}

// ---------------------------------------------------------------------------

std::vector<Example> load_examples(const std::filesystem::path& manifest_path,
                                   const std::vector<Utterance>& utts, const Vocabulary& vocab) {
  const std::filesystem::path dir = manifest_path.parent_path();
  std::vector<Example> out;
  out.reserve(utts.size());
  for (const Utterance& u : utts) {
    out.push_back({u, read_wav(dir / u.audio), vocab.encode(u.text)});
  }
  return out;
}

std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                      order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return plan;
}

std::vector<Batch> make_batches(const std::vector<Example>& examples, std::size_t batch_size,
                                Rng& rng) {
  std::vector<Batch> batches;
  for (auto& chunk : batch_plan(examples.size(), batch_size, rng)) {
    Batch b;
    for (std::size_t i : chunk) b.max_audio_length = std::max(b.max_audio_length, examples[i].wave.size());
    b.audio.assign(chunk.size() * b.max_audio_length, 0.0f);
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      const Example& ex = examples[chunk[r]];
      std::copy(ex.wave.samples.begin(), ex.wave.samples.end(),
                b.audio.begin() + static_cast<std::ptrdiff_t>(r * b.max_audio_length));
      b.ids.push_back(ex.utt.id);
      b.audio_lengths.push_back(ex.wave.size());
      b.targets.push_back(ex.target);
    }
    b.indices = std::move(chunk);
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---------------------------------------------------------------------------

void ToyCorpusConfig::validate() const {
  if (lexicon.empty()) throw Error(ErrorCode::InvalidConfig, "empty lexicon");
  if (min_words == 0 || min_words > max_words) {
    throw Error(ErrorCode::InvalidConfig, "need 1 <= min_words <= max_words");
  }
  if (standard_counts.train == 0 || standard_counts.dev == 0 || dialect_counts.train == 0 ||
      dialect_counts.dev == 0 || dialect_counts.test == 0) {
    throw Error(ErrorCode::InvalidConfig, "split counts must be positive");
  }
  if (!(min_pitch > 0.0) || min_pitch > max_pitch) {
    throw Error(ErrorCode::InvalidConfig, "bad pitch range");
  }
  const VoiceProfile voice = default_voice_profile();
  auto check_word = [&](const std::string& w) {
    if (w.empty()) throw Error(ErrorCode::InvalidConfig, "empty word");
    for (char32_t c : utf8_to_u32(w)) {
      if (!voice.formant_table.contains(c)) {
        throw Error(ErrorCode::InvalidConfig, "word \"" + w + "\" uses a character outside the alphabet");
      }
    }
  };
  for (const std::string& w : lexicon) check_word(w);
  for (const auto& [tag, subs] : dialect_substitutions) {
    if (tag == kStandardDialect) throw Error(ErrorCode::InvalidConfig, "dialect tag \"std\" is reserved");
    if (!accent_factors.contains(tag)) {
      throw Error(ErrorCode::InvalidConfig, "no accent factor for dialect " + tag);
    }
    for (const auto& [from, to] : subs) check_word(to);
  }
  for (const auto& [tag, factor] : accent_factors) {
    VoiceProfile v = voice;
    v.accent_factor = factor;
    v.validate();
  }
}

ToyCorpusConfig default_toy_corpus_config() {
  ToyCorpusConfig cfg;
  cfg.lexicon = {"ami",  "tumi", "kal",  "bon",  "dal",  "nodi", "mati", "kobe", "lota", "bela",
                 "dike", "moni", "tel",  "bati", "lal",  "nil",  "kumu", "dola", "mela", "tala",
                 "ben",  "kan",  "nak",  "dim",  "buk",  "ek",   "dui",  "tin",  "mon",  "lebu",
                 "kola", "noton", "bado", "emon", "din",  "muk",  "oli",  "tok",  "ude",  "neta"};
  cfg.dialect_substitutions["A"] = {
      {"ami", "ai"},   {"tumi", "tui"},  {"kal", "kail"},   {"bon", "boin"}, {"dal", "dail"},
      {"nodi", "nodu"}, {"mati", "maiti"}, {"kobe", "kobo"}, {"lota", "luta"}, {"bela", "bala"}};
  cfg.dialect_substitutions["B"] = {
      {"ami", "mui"}, {"tumi", "tomi"}, {"moni", "monu"}, {"tel", "teil"},  {"bati", "baita"},
      {"lal", "lalo"}, {"nil", "nilo"}, {"din", "dino"},  {"ek", "ekta"},   {"tin", "tinta"}};
  cfg.accent_factors = {{"A", 1.12}, {"B", 0.90}};
  return cfg;
}

std::string apply_substitutions(std::string_view sentence,
                                const std::map<std::string, std::string>& subs) {
  std::string out;
  for (const std::string& w : split_words(sentence)) {
    if (!out.empty()) out += ' ';
    const auto it = subs.find(w);
    out += it == subs.end() ? w : it->second;
  }
  return out;
}

namespace {

std::string make_id(std::string_view dialect, std::string_view split, std::size_t n) {
  std::ostringstream os;
  os << dialect << '-' << split << '-';
  os.width(4);
  os.fill('0');
  os << n;
  return os.str();
}

}  // namespace

ToyCorpus gen_toy_corpus(const ToyCorpusConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "wav").string() + ": " + ec.message());

  Rng sentence_rng(derive_seed(cfg.seed, "sentences"));
  std::set<std::string> used;
  // Every base sentence is used once across all dialects and splits.
  auto fresh_sentence = [&]() {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const std::size_t n =
          cfg.min_words + sentence_rng.uniform_int(cfg.max_words - cfg.min_words + 1);
      std::string s;
      for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += cfg.lexicon[sentence_rng.uniform_int(cfg.lexicon.size())];
      }
      if (used.insert(s).second) return s;
    }
    throw Error(ErrorCode::InvalidConfig, "lexicon too small for the requested sentence counts");
  };

  ToyCorpus corpus;
  const VoiceProfile base_voice = default_voice_profile();
  auto emit = [&](std::vector<Utterance>& dest, const std::string& dialect, const std::string& split,
                  std::size_t count, double accent, const std::map<std::string, std::string>* subs) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string base = fresh_sentence();
      Utterance u;
      u.id = make_id(dialect, split, i);
      u.audio = "wav/" + u.id + ".wav";
      u.text = subs ? apply_substitutions(base, *subs) : base;
      u.dialect = dialect;
      u.split = split;
      Rng voice_rng(derive_seed(cfg.seed, "utterance", u.id));
      VoiceProfile voice = base_voice;
      voice.accent_factor = accent;
      voice.base_pitch = voice_rng.uniform(cfg.min_pitch, cfg.max_pitch);
      write_wav(out_dir / u.audio, synth_utterance(u.text, voice, voice_rng));
      dest.push_back(std::move(u));
    }
  };

  const std::string std_tag(kStandardDialect);
  emit(corpus.standard, std_tag, "train", cfg.standard_counts.train, 1.0, nullptr);
  emit(corpus.standard, std_tag, "dev", cfg.standard_counts.dev, 1.0, nullptr);
  emit(corpus.standard, std_tag, "test", cfg.standard_counts.test, 1.0, nullptr);
  for (const auto& [tag, subs] : cfg.dialect_substitutions) {
    const double accent = cfg.accent_factors.at(tag);
    emit(corpus.dialect, tag, "train", cfg.dialect_counts.train, accent, &subs);
    emit(corpus.dialect, tag, "dev", cfg.dialect_counts.dev, accent, &subs);
    emit(corpus.dialect, tag, "test", cfg.dialect_counts.test, accent, &subs);
  }
  save_manifest(corpus.standard, out_dir / kStandardManifest);
  save_manifest(corpus.dialect, out_dir / kDialectManifest);
  return corpus;
}

}  // namespace tda
