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

#include "tda/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "tda/error.hpp"

namespace tda {

using json = nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, name_ + " must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "a number");
    }
    try {
      field = v.get<T>();
    } catch (const json::exception&) {
      fail(key, "of the right type");
    }
  }

  // Marks a key as known and returns it, or null when absent.
  const json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown key " + name_ + "." + key);
    }
  }

  const std::string& name() const { return name_; }

 private:
  [[noreturn]] void fail(const std::string& key, const char* what) const {
    throw Error(ErrorCode::InvalidConfig, name_ + "." + key + " must be " + what);
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

json adamw_to_json(const AdamWConfig& a) {
  return {{"betas", {a.beta1, a.beta2}}, {"eps", a.eps}, {"weight_decay", a.weight_decay}};
}

void read_adamw(Section& s, AdamWConfig& a) {
  if (const json* b = s.raw("betas")) {
    if (!b->is_array() || b->size() != 2 || !(*b)[0].is_number() || !(*b)[1].is_number()) {
      throw Error(ErrorCode::InvalidConfig, s.name() + ".betas must be [beta1, beta2]");
    }
    a.beta1 = (*b)[0].get<double>();
    a.beta2 = (*b)[1].get<double>();
  }
  s.get("eps", a.eps);
  s.get("weight_decay", a.weight_decay);
}

std::vector<NoiseSpec> read_specs(const json& j, const std::string& name) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, name + " must be a list");
  std::vector<NoiseSpec> out;
  for (const json& e : j) out.push_back(noise_spec_from_json(e));
  return out;
}

json specs_to_json(const std::vector<NoiseSpec>& specs) {
  json out = json::array();
  for (const NoiseSpec& s : specs) out.push_back(noise_spec_to_json(s));
  return out;
}

json train_to_json(const TrainConfig& t) {
  json j = {{"peak_lr", t.peak_lr},
            {"epochs", t.epochs},
            {"warmup_frac", t.warmup_frac},
            {"batch_size", t.batch_size},
            {"seed", t.seed},
            {"grad_clip_norm", t.grad_clip_norm}};
  j.update(adamw_to_json(t.adamw));
  if (t.stage == 2) {
    j["snr_levels"] = t.snr_levels;
    j["noise_specs"] = specs_to_json(t.noise_specs);
    j["noise_augmentation"] = t.noise_augmentation;
  }
  return j;
}

TrainConfig train_from_json(const json& j, int stage) {
  TrainConfig t = stage == 1 ? TrainConfig::stage1_defaults() : TrainConfig::stage2_defaults();
  Section s(j, "stage" + std::to_string(stage));
  s.get("peak_lr", t.peak_lr);
  s.get("epochs", t.epochs);
  s.get("warmup_frac", t.warmup_frac);
  s.get("batch_size", t.batch_size);
  s.get("seed", t.seed);
  s.get("grad_clip_norm", t.grad_clip_norm);
  read_adamw(s, t.adamw);
  if (stage == 2) {
    s.get("snr_levels", t.snr_levels);
    if (const json* n = s.raw("noise_specs")) t.noise_specs = read_specs(*n, "stage2.noise_specs");
    s.get("noise_augmentation", t.noise_augmentation);
  }
  s.finish();
  return t;
}

json pretrain_to_json(const PretrainConfig& p) {
  json j = {{"steps", p.steps},
            {"batch_size", p.batch_size},
            {"peak_lr", p.peak_lr},
            {"warmup_frac", p.warmup_frac},
            {"grad_clip_norm", p.grad_clip_norm},
            {"mask_prob", p.mask_prob},
            {"mask_span", p.mask_span},
            {"p_noisy", p.p_noisy},
            {"snr_levels", p.snr_levels},
            {"kmeans_iters", p.kmeans_iters},
            {"kmeans_max_frames", p.kmeans_max_frames},
            {"seed", p.seed}};
  j.update(adamw_to_json(p.adamw));
  return j;
}

PretrainConfig pretrain_from_json(const json& j) {
  PretrainConfig p;
  Section s(j, "pretrain");
  s.get("steps", p.steps);
  s.get("batch_size", p.batch_size);
  s.get("peak_lr", p.peak_lr);
  s.get("warmup_frac", p.warmup_frac);
  s.get("grad_clip_norm", p.grad_clip_norm);
  s.get("mask_prob", p.mask_prob);
  s.get("mask_span", p.mask_span);
  s.get("p_noisy", p.p_noisy);
  s.get("snr_levels", p.snr_levels);
  s.get("kmeans_iters", p.kmeans_iters);
  s.get("kmeans_max_frames", p.kmeans_max_frames);
  s.get("seed", p.seed);
  read_adamw(s, p.adamw);
  s.finish();
  return p;
}

json counts_to_json(const SplitCounts& c) { return {{"train", c.train}, {"dev", c.dev}, {"test", c.test}}; }

SplitCounts counts_from_json(const json& j, const std::string& name) {
  SplitCounts c;
  Section s(j, name);
  s.get("train", c.train);
  s.get("dev", c.dev);
  s.get("test", c.test);
  s.finish();
  return c;
}

json corpus_to_json(const ToyCorpusConfig& c) {
  return {{"lexicon", c.lexicon},
          {"dialect_substitutions", c.dialect_substitutions},
          {"accent_factors", c.accent_factors},
          {"standard_counts", counts_to_json(c.standard_counts)},
          {"dialect_counts", counts_to_json(c.dialect_counts)},
          {"min_words", c.min_words},
          {"max_words", c.max_words},
          {"min_pitch", c.min_pitch},
          {"max_pitch", c.max_pitch},
          {"seed", c.seed}};
}

ToyCorpusConfig corpus_from_json(const json& j) {
  ToyCorpusConfig c = default_toy_corpus_config();
  Section s(j, "corpus");
  s.get("lexicon", c.lexicon);
  s.get("dialect_substitutions", c.dialect_substitutions);
  s.get("accent_factors", c.accent_factors);
  if (const json* v = s.raw("standard_counts")) c.standard_counts = counts_from_json(*v, "corpus.standard_counts");
  if (const json* v = s.raw("dialect_counts")) c.dialect_counts = counts_from_json(*v, "corpus.dialect_counts");
  s.get("min_words", c.min_words);
  s.get("max_words", c.max_words);
  s.get("min_pitch", c.min_pitch);
  s.get("max_pitch", c.max_pitch);
  s.get("seed", c.seed);
  s.finish();
  return c;
}

json eval_to_json(const EvalConfig& e) {
  std::vector<std::string> labels;
  for (const Condition& c : e.conditions) labels.push_back(c.label());
  return {{"snr_conditions", labels}, {"noise_specs", specs_to_json(e.noise_specs)}, {"seed", e.seed}};
}

EvalConfig eval_from_json(const json& j) {
  EvalConfig e;
  Section s(j, "eval");
  if (const json* v = s.raw("snr_conditions")) {
    if (!v->is_array()) throw Error(ErrorCode::InvalidConfig, "eval.snr_conditions must be a list");
    e.conditions.clear();
    for (const json& c : *v) {
      if (c.is_string()) {
        e.conditions.push_back(Condition::parse(c.get<std::string>()));
      } else if (c.is_number()) {
        e.conditions.push_back(Condition::at(c.get<double>()));
      } else {
        throw Error(ErrorCode::InvalidConfig, "eval.snr_conditions entries must be \"clean\" or numbers");
      }
    }
  }
  if (const json* v = s.raw("noise_specs")) e.noise_specs = read_specs(*v, "eval.noise_specs");
  s.get("seed", e.seed);
  s.finish();
  return e;
}

}  // namespace

EvalConfig::EvalConfig() {
  for (NoiseKind k : {NoiseKind::White, NoiseKind::BabbleSurrogate, NoiseKind::Hum, NoiseKind::FactorySurrogate}) {
    noise_specs.push_back({k, 1001, 4.0});
  }
}

void Config::apply_seed() {
  if (!seed) return;
  pretrain.seed = *seed;
  stage1.seed = *seed;
  stage2.seed = *seed;
  eval.seed = *seed;
}

void Config::validate() const {
  if (model.vocab_size != 0) model.validate();
  pretrain.validate();
  stage1.validate();
  stage2.validate();
  corpus.validate();
  if (stage1.stage != 1 || stage2.stage != 2) throw Error(ErrorCode::InvalidConfig, "stage sections mislabelled");
  validate_stage_pair(stage1, stage2);
  if (eval.conditions.empty()) throw Error(ErrorCode::InvalidConfig, "eval.snr_conditions is empty");
  const bool noisy = std::any_of(eval.conditions.begin(), eval.conditions.end(),
                                 [](const Condition& c) { return c.snr_db.has_value(); });
  if (noisy && eval.noise_specs.empty()) throw Error(ErrorCode::InvalidConfig, "eval.noise_specs is empty");
}

nlohmann::json noise_spec_to_json(const NoiseSpec& spec) {
  return {{"kind", std::string(noise_kind_name(spec.kind))}, {"seed", spec.seed}, {"duration", spec.duration}};
}

NoiseSpec noise_spec_from_json(const nlohmann::json& j) {
  NoiseSpec spec;
  Section s(j, "noise_spec");
  std::string kind = std::string(noise_kind_name(spec.kind));
  s.get("kind", kind);
  spec.kind = parse_noise_kind(kind);
  s.get("seed", spec.seed);
  s.get("duration", spec.duration);
  s.finish();
  return spec;
}

Config config_from_json(const nlohmann::json& j) {
  Config cfg;
  Section s(j, "config");
  if (const json* v = s.raw("model")) cfg.model = ModelConfig::from_json(*v);
  if (const json* v = s.raw("pretrain")) cfg.pretrain = pretrain_from_json(*v);
  if (const json* v = s.raw("stage1")) cfg.stage1 = train_from_json(*v, 1);
  if (const json* v = s.raw("stage2")) cfg.stage2 = train_from_json(*v, 2);
  if (const json* v = s.raw("corpus")) cfg.corpus = corpus_from_json(*v);
  if (const json* v = s.raw("eval")) cfg.eval = eval_from_json(*v);
  std::uint64_t seed = 0;
  if (s.raw("seed")) {
    s.get("seed", seed);
    cfg.seed = seed;
  }
  s.finish();
  return cfg;
}

nlohmann::json config_to_json(const Config& cfg) {
  json j = {{"model", cfg.model.to_json()},
            {"pretrain", pretrain_to_json(cfg.pretrain)},
            {"stage1", train_to_json(cfg.stage1)},
            {"stage2", train_to_json(cfg.stage2)},
            {"corpus", corpus_to_json(cfg.corpus)},
            {"eval", eval_to_json(cfg.eval)}};
  if (cfg.seed) j["seed"] = *cfg.seed;
  return j;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace tda
