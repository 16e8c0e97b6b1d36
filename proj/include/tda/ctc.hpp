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

// Connectionist temporal classification over per-frame log-probabilities.
// All dynamic programming runs in double precision in log space.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tda/corpus.hpp"
#include "tda/tensor.hpp"

namespace tda {

// Drop adjacent duplicates, then blanks.
std::vector<int> collapse(std::span<const int> path);

// Row-major [frames x classes] view of log-probabilities.
struct LogProbView {
  std::span<const double> data;
  std::size_t frames = 0;
  std::size_t classes = 0;

  double at(std::size_t t, std::size_t k) const { return data[t * classes + k]; }
};

struct CtcResult {
  double loss = 0.0;  // -log P(target | x) in nats; +inf when infeasible
  bool feasible = true;
  // d loss / d log_probs, [frames x classes]; empty when infeasible.
  std::vector<double> grad;
  // Lattice tables [frames x (2U + 1)], filled on request. alpha includes
  // the emission at t, beta covers frames after t only, so for every t
  // logsumexp_s(alpha + beta) == -loss.
  std::vector<double> alpha;
  std::vector<double> beta;
  std::size_t lattice = 0;
};

// Minimum frame count for a target: U plus one per adjacent repeat.
std::size_t ctc_min_frames(std::span<const int> target);

// Throws InvalidTarget (blank or out-of-range label in the target),
// UnnormalizedRow (|sum_k exp(row) - 1| > 1e-4), ShapeMismatch.
CtcResult ctc_loss(const LogProbView& log_probs, std::span<const int> target,
                   bool keep_tables = false);

template <typename T>
CtcResult ctc_loss(const Tensor<T>& log_probs, std::span<const int> target,
                   bool keep_tables = false);

// Graph op: scalar loss whose backward pushes the analytic CTC gradient into
// log_probs. An infeasible target gives +inf and no gradient.
template <typename T>
Tensor<T> ctc_loss_node(const Tensor<T>& log_probs, std::span<const int> target);

// Literal sum over all classes^frames paths. TooLargeToEnumerate above 1e6
// paths.
double brute_force_ctc(const LogProbView& log_probs, std::span<const int> target);

// Per-frame argmax (lowest id wins ties), then collapse.
std::vector<int> best_path(const LogProbView& log_probs);

template <typename T>
std::vector<int> best_path(const Tensor<T>& log_probs);

template <typename T>
std::string greedy_decode(const Tensor<T>& log_probs, const Vocabulary& vocab);

}  // namespace tda
