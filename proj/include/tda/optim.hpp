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

// AdamW with decoupled weight decay, the warmup/linear-decay schedule and
// global gradient-norm clipping.

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tda/model.hpp"

namespace tda {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 0.01;
};

template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // One update of every parameter from its current gradient:
  //   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
  //   theta -= lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
  // Throws NonFiniteGradient, leaving parameters and moments untouched.
  // Parameters without a gradient buffer are treated as g = 0.
  void step(ModelParams<T>& params, double lr);

  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

// warm = round(warmup_frac * total). lr = peak (step + 1) / warm while
// step < warm, then peak (total - step) / (total - warm); never negative.
double lr_schedule(std::size_t step, std::size_t total_steps, double peak, double warmup_frac);

// Global L2 norm over every gradient buffer.
template <typename T>
double grad_norm(const ModelParams<T>& params);

// Rescales gradients so their global norm is at most max_norm; returns the
// norm before clipping. max_norm <= 0 disables clipping.
template <typename T>
double clip_grad_norm(ModelParams<T>& params, double max_norm);

template <typename T>
void scale_grads(ModelParams<T>& params, double factor);

}  // namespace tda
