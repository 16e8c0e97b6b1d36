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

// Word and character error rates, SNR-sweep evaluation and report files.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tda/audio.hpp"
#include "tda/corpus.hpp"
#include "tda/model.hpp"

namespace tda {

struct EditStats {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double rate() const;  // errors / ref_length; EmptyReference when ref_length is 0
  EditStats& operator+=(const EditStats& other);
  bool operator==(const EditStats&) const = default;
};

// Unit-cost minimum edit alignment. The backtrace prefers match, then
// substitution, then deletion, then insertion.
EditStats levenshtein_align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
EditStats levenshtein_align(std::u32string_view ref, std::u32string_view hyp);

// Text is NFC-normalized and whitespace-collapsed first. Words are split on
// whitespace; characters include the single spaces between words.
EditStats word_stats(std::string_view ref, std::string_view hyp);
EditStats char_stats(std::string_view ref, std::string_view hyp);

// EmptyReference when the normalized reference is empty.
double wer(std::string_view ref, std::string_view hyp);
double cer(std::string_view ref, std::string_view hyp);

// Pooled corpus rates: total errors over total reference tokens.
struct CorpusScore {
  EditStats words;
  EditStats chars;
  std::size_t utterances = 0;

  void add(std::string_view ref, std::string_view hyp);
  double wer() const { return words.rate(); }
  double cer() const { return chars.rate(); }
};

// An evaluation condition: clean audio, or noise mixed at snr_db.
struct Condition {
  std::optional<double> snr_db;

  static Condition clean() { return {}; }
  static Condition at(double db) { return {db}; }
  std::string label() const;  // "clean" or the dB value, e.g. "5"
  static Condition parse(std::string_view label);  // InvalidConfig
  bool operator==(const Condition&) const = default;
};

// clean, 20, 10, 5, 0.
std::vector<Condition> standard_conditions();

inline constexpr std::string_view kAllDialects = "all";

struct ReportRow {
  std::string model_id;
  std::string dialect;
  std::string condition;
  double wer = 0.0;
  double cer = 0.0;
  std::size_t n_utts = 0;
  std::size_t total_ref_words = 0;
  std::size_t total_ref_chars = 0;

  bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  // MissingCondition when absent.
  const ReportRow& find(std::string_view model_id, std::string_view dialect, std::string_view condition) const;
};

// Decodes every example under every condition. Noisy conditions mix one bank
// clip chosen, with its offset, by a generator keyed on (seed, utterance id,
// condition), so reports are reproducible and comparable across models.
// Rows are one per dialect and condition, plus pooled "all" rows when more
// than one dialect is present; sorted by dialect then condition order.
EvalReport snr_sweep_eval(const std::string& model_id, const ModelParams<float>& params,
                          const ModelConfig& cfg, const Vocabulary& vocab,
                          const std::vector<Example>& test, const std::vector<Condition>& conditions,
                          const std::vector<Waveform>& noise_bank, std::uint64_t seed);

enum class AblationVariant { Full, NoStage1, NoNoiseAug };

std::string_view variant_name(AblationVariant v);   // full, no_stage1, no_noise_aug
std::string_view variant_label(AblationVariant v);  // table row label
AblationVariant parse_variant(std::string_view name);  // InvalidConfig
inline constexpr AblationVariant kAllVariants[] = {AblationVariant::Full, AblationVariant::NoStage1,
                                                   AblationVariant::NoNoiseAug};

struct AblationRow {
  AblationVariant variant;
  std::string label;
  double wer = 0.0;
  double cer = 0.0;
};

// One row per variant in table order, read from each variant's report
// (model_id = variant name) at the given dialect and condition.
std::vector<AblationRow> ablation_report(const std::map<AblationVariant, EvalReport>& reports,
                                         std::string_view dialect, const Condition& condition = Condition::at(5));

std::string format_ablation_table(const std::vector<AblationRow>& rows);

enum class ReportFormat { Csv, Json };

// CSV header model_id,dialect,condition,wer,cer,n_utts,total_ref_words,
// total_ref_chars; rates printed with six decimals. IoError.
std::string format_report(const EvalReport& report, ReportFormat format);
EvalReport parse_report(std::string_view text, ReportFormat format);
void emit_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);

// (condition, WER) pairs for one model and dialect in clean, 20, ..., 0 order.
std::vector<std::pair<std::string, double>> degradation_curve(const EvalReport& report,
                                                              std::string_view model_id,
                                                              std::string_view dialect);

// Long-format file for plotting: model_id,dialect,condition,order,wer,cer.
void emit_curve(const EvalReport& report, const std::filesystem::path& path);

}  // namespace tda
