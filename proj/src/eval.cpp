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

#include "tda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tda/error.hpp"
#include "tda/text.hpp"

namespace tda {

namespace {

template <typename Seq>
EditStats align(const Seq& ref, const Seq& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditStats s;
  s.ref_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      --i, --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      ++s.substitutions;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++s.deletions;
      --i;
    } else {
      ++s.insertions;
      --j;
    }
  }
  return s;
}

std::string normalize(std::string_view text) { return collapse_whitespace(nfc(text)); }

// Sort key placing clean first, then decreasing SNR.
std::pair<int, double> condition_key(const std::string& label) {
  const Condition c = Condition::parse(label);
  return c.snr_db ? std::pair{1, -*c.snr_db} : std::pair{0, 0.0};
}

std::string format_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double EditStats::rate() const {
  if (ref_length == 0) throw Error(ErrorCode::EmptyReference, "reference has no tokens");
  return static_cast<double>(errors()) / static_cast<double>(ref_length);
}

EditStats& EditStats::operator+=(const EditStats& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

EditStats levenshtein_align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  return align(ref, hyp);
}

EditStats levenshtein_align(std::u32string_view ref, std::u32string_view hyp) { return align(ref, hyp); }

EditStats word_stats(std::string_view ref, std::string_view hyp) {
  return align(split_words(normalize(ref)), split_words(normalize(hyp)));
}

EditStats char_stats(std::string_view ref, std::string_view hyp) {
  return align(utf8_to_u32(normalize(ref)), utf8_to_u32(normalize(hyp)));
}

double wer(std::string_view ref, std::string_view hyp) { return word_stats(ref, hyp).rate(); }

double cer(std::string_view ref, std::string_view hyp) { return char_stats(ref, hyp).rate(); }

void CorpusScore::add(std::string_view ref, std::string_view hyp) {
  const EditStats w = word_stats(ref, hyp);
  if (w.ref_length == 0) throw Error(ErrorCode::EmptyReference, "empty reference transcript");
  words += w;
  chars += char_stats(ref, hyp);
  ++utterances;
}

std::string Condition::label() const {
  if (!snr_db) return "clean";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", *snr_db);
  return buf;
}

Condition Condition::parse(std::string_view label) {
  if (label == "clean") return clean();
  std::string s(label);
  if (s.size() > 2 && s.substr(s.size() - 2) == "dB") s.resize(s.size() - 2);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return at(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, "bad condition '" + std::string(label) + "'");
}

std::vector<Condition> standard_conditions() {
  return {Condition::clean(), Condition::at(20), Condition::at(10), Condition::at(5), Condition::at(0)};
}

const ReportRow& EvalReport::find(std::string_view model_id, std::string_view dialect,
                                  std::string_view condition) const {
  for (const ReportRow& r : rows) {
    if (r.model_id == model_id && r.dialect == dialect && r.condition == condition) return r;
  }
  throw Error(ErrorCode::MissingCondition, "no row for " + std::string(model_id) + "/" + std::string(dialect) +
                                               "/" + std::string(condition));
}

EvalReport snr_sweep_eval(const std::string& model_id, const ModelParams<float>& params,
                          const ModelConfig& cfg, const Vocabulary& vocab,
                          const std::vector<Example>& test, const std::vector<Condition>& conditions,
                          const std::vector<Waveform>& noise_bank, std::uint64_t seed) {
  if (test.empty()) throw Error(ErrorCode::EmptyCorpus, "no test utterances");
  const bool any_noisy = std::any_of(conditions.begin(), conditions.end(), [](const Condition& c) { return c.snr_db.has_value(); });
  if (any_noisy && noise_bank.empty()) throw Error(ErrorCode::InvalidConfig, "noisy conditions need a noise bank");

  std::map<std::pair<std::string, std::string>, CorpusScore> scores;
  std::set<std::string> dialects;
  for (const Example& ex : test) dialects.insert(ex.utt.dialect);
  const bool pooled = dialects.size() > 1;
  for (const Condition& cond : conditions) {
    const std::string label = cond.label();
    for (const Example& ex : test) {
      std::string hyp;
      if (cond.snr_db) {
        Rng rng(derive_seed(seed, "eval-noise", ex.utt.id + "@" + label));
        const Waveform& noise = noise_bank[rng.uniform_int(noise_bank.size())];
        hyp = transcribe(mix_at_snr(ex.wave, noise, *cond.snr_db, rng).samples, params, cfg, vocab);
      } else {
        hyp = transcribe(ex.wave.samples, params, cfg, vocab);
      }
      scores[{ex.utt.dialect, label}].add(ex.utt.text, hyp);
      if (pooled) scores[{std::string(kAllDialects), label}].add(ex.utt.text, hyp);
    }
  }
  EvalReport report;
  for (const auto& [key, s] : scores) {
    report.rows.push_back({model_id, key.first, key.second, s.wer(), s.cer(), s.utterances, s.words.ref_length,
                           s.chars.ref_length});
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.dialect != b.dialect) return a.dialect < b.dialect;
    return condition_key(a.condition) < condition_key(b.condition);
  });
  return report;
}

std::string_view variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::Full:
      return "full";
    case AblationVariant::NoStage1:
      return "no_stage1";
    case AblationVariant::NoNoiseAug:
      return "no_noise_aug";
  }
  return "full";
}

std::string_view variant_label(AblationVariant v) {
  switch (v) {
    case AblationVariant::Full:
      return "Full framework (Stage 1 + Stage 2 with noise augmentation)";
    case AblationVariant::NoStage1:
      return "w/o Stage 1 (direct fine-tuning on noisy dialect data)";
    case AblationVariant::NoNoiseAug:
      return "w/o Noise Augmentation (Stage 1 + Stage 2 on clean dialect data)";
  }
  return "";
}

AblationVariant parse_variant(std::string_view name) {
  for (AblationVariant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown ablation variant '" + std::string(name) + "'");
}

std::vector<AblationRow> ablation_report(const std::map<AblationVariant, EvalReport>& reports,
                                         std::string_view dialect, const Condition& condition) {
  std::vector<AblationRow> rows;
  for (AblationVariant v : kAllVariants) {
    const auto it = reports.find(v);
    if (it == reports.end()) {
      throw Error(ErrorCode::MissingCondition, "no report for variant " + std::string(variant_name(v)));
    }
    const ReportRow& r = it->second.find(variant_name(v), dialect, condition.label());
    rows.push_back({v, std::string(variant_label(v)), r.wer, r.cer});
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "configuration,wer,cer\n";
  for (const AblationRow& r : rows) out << '"' << r.label << "\"," << format_rate(r.wer) << ',' << format_rate(r.cer) << '\n';
  return out.str();
}

std::string format_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const ReportRow& r : report.rows) {
      rows.push_back({{"model_id", r.model_id},
                      {"dialect", r.dialect},
                      {"condition", r.condition},
                      {"wer", r.wer},
                      {"cer", r.cer},
                      {"n_utts", r.n_utts},
                      {"total_ref_words", r.total_ref_words},
                      {"total_ref_chars", r.total_ref_chars}});
    }
    return nlohmann::ordered_json{{"rows", rows}}.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "model_id,dialect,condition,wer,cer,n_utts,total_ref_words,total_ref_chars\n";
  for (const ReportRow& r : report.rows) {
    out << r.model_id << ',' << r.dialect << ',' << r.condition << ',' << format_rate(r.wer) << ','
        << format_rate(r.cer) << ',' << r.n_utts << ',' << r.total_ref_words << ',' << r.total_ref_chars << '\n';
  }
  return out.str();
}

EvalReport parse_report(std::string_view text, ReportFormat format) {
  EvalReport report;
  if (format == ReportFormat::Json) {
    try {
      const auto doc = nlohmann::json::parse(text);
      for (const auto& r : doc.at("rows")) {
        report.rows.push_back({r.at("model_id").get<std::string>(), r.at("dialect").get<std::string>(),
                               r.at("condition").get<std::string>(), r.at("wer").get<double>(),
                               r.at("cer").get<double>(), r.at("n_utts").get<std::size_t>(),
                               r.at("total_ref_words").get<std::size_t>(), r.at("total_ref_chars").get<std::size_t>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedLine, std::string("report JSON: ") + e.what());
    }
    return report;
  }
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw Error(ErrorCode::MalformedLine, "report line " + std::to_string(line_no));
    try {
      report.rows.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stoul(f[5]), std::stoul(f[6]),
                             std::stoul(f[7])});
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedLine, "report line " + std::to_string(line_no));
    }
  }
  return report;
}

void emit_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
  const std::string text = format_report(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<std::pair<std::string, double>> degradation_curve(const EvalReport& report, std::string_view model_id,
                                                              std::string_view dialect) {
  std::vector<std::pair<std::string, double>> curve;
  for (const ReportRow& r : report.rows) {
    if (r.model_id == model_id && r.dialect == dialect) curve.emplace_back(r.condition, r.wer);
  }
  std::stable_sort(curve.begin(), curve.end(),
                   [](const auto& a, const auto& b) { return condition_key(a.first) < condition_key(b.first); });
  return curve;
}

void emit_curve(const EvalReport& report, const std::filesystem::path& path) {
  std::vector<ReportRow> rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    if (a.dialect != b.dialect) return a.dialect < b.dialect;
    return condition_key(a.condition) < condition_key(b.condition);
  });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "model_id,dialect,condition,order,wer,cer\n";
  std::map<std::pair<std::string, std::string>, int> order;
  for (const ReportRow& r : rows) {
    out << r.model_id << ',' << r.dialect << ',' << r.condition << ',' << order[{r.model_id, r.dialect}]++ << ','
        << format_rate(r.wer) << ',' << format_rate(r.cer) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace tda
