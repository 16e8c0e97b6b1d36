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

// Shared helpers for the unit tests and the acceptance runner.

#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "tda/error.hpp"
#include "tda/model.hpp"
#include "tda/rng.hpp"

namespace tda::testing {

// d_model 16, two layers, two heads; 50 input samples give 12 frames.
inline ModelConfig tiny_model_config(std::size_t vocab_size = 4) {
  ModelConfig cfg;
  cfg.conv_layers = {{4, 4, 2}, {4, 4, 2}};
  cfg.norm_groups = 2;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.rel_bias_max_dist = 4;
  cfg.vocab_size = vocab_size;
  cfg.pretrain_clusters = 5;
  return cfg;
}

// Moves every parameter away from its structured initial value (zero
// biases, unit gammas, zero rel-bias table) so no gradient path is
// degenerate during finite-difference checks.
template <typename T>
void randomize(ModelParams<T>& params, Rng& rng, double spread = 0.3) {
  for (auto& [name, t] : params.tensors) {
    for (T& v : t.mutable_data()) v += static_cast<T>(spread * rng.uniform(-1.0, 1.0));
  }
}

inline std::vector<float> random_audio(Rng& rng, std::size_t n, double amplitude = 0.5) {
  std::vector<float> out(n);
  for (float& v : out) v = static_cast<float>(rng.uniform(-amplitude, amplitude));
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tda_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// The code of the Error thrown by f, or an out-of-range value if none.
template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(-1);
}

}  // namespace tda::testing
