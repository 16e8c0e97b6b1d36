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

// The experiment configuration shared by every CLI command: one JSON
// document with optional sections, each defaulting field by field.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "tda/corpus.hpp"
#include "tda/eval.hpp"
#include "tda/model.hpp"
#include "tda/pretrain.hpp"
#include "tda/train.hpp"

namespace tda {

struct EvalConfig {
  std::vector<Condition> conditions = standard_conditions();
  std::vector<NoiseSpec> noise_specs;  // defaults: the four kinds, seed 1001
  std::uint64_t seed = 99;

  EvalConfig();
};

struct Config {
  ModelConfig model;
  PretrainConfig pretrain;
  TrainConfig stage1 = TrainConfig::stage1_defaults();
  TrainConfig stage2 = TrainConfig::stage2_defaults();
  ToyCorpusConfig corpus = default_toy_corpus_config();
  EvalConfig eval;
  // When set, replaces the seed of every section.
  std::optional<std::uint64_t> seed;

  // Pushes `seed` into every section.
  void apply_seed();
  // InvalidConfig on any invalid section or stage-2 lr >= stage-1 lr.
  void validate() const;
};

// Missing keys keep their defaults; unknown keys are InvalidConfig.
Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& cfg);

// IoError when unreadable, InvalidConfig on parse errors.
Config load_config(const std::filesystem::path& path);

nlohmann::json noise_spec_to_json(const NoiseSpec& spec);
NoiseSpec noise_spec_from_json(const nlohmann::json& j);

}  // namespace tda
