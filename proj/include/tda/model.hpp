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

// The acoustic model: a strided CNN feature encoder, a post-norm Transformer
// encoder whose attention logits carry a gated relative position bias, and a
// log-softmax CTC head. Also houses the pre-training head, the learned mask
// embedding, initialization and the checkpoint format.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tda/corpus.hpp"
#include "tda/rng.hpp"
#include "tda/tensor.hpp"

namespace tda {

struct ConvLayerSpec {
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;

  bool operator==(const ConvLayerSpec&) const = default;
};

struct ModelConfig {
  std::vector<ConvLayerSpec> conv_layers = {{64, 10, 5}, {64, 8, 4}, {64, 4, 2},
                                            {64, 4, 2},  {64, 4, 2}, {64, 2, 2}};
  std::size_t norm_groups = 8;  // group-norm groups in every conv layer
  std::size_t d_model = 64;
  std::size_t n_layers = 3;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t rel_bias_max_dist = 16;
  std::size_t vocab_size = 0;  // including blank
  std::size_t pretrain_clusters = 32;

  // InvalidConfig on zero dims, d_model % n_heads != 0, or conv channels not
  // divisible by norm_groups.
  void validate() const;

  std::size_t downsample() const;  // product of strides
  // Output frame count for an input of `samples`: floor(samples / s) applied
  // per layer, since each conv input is right-padded by kernel - stride
  // zeros. 0 when too short.
  std::size_t frames_for(std::size_t samples) const;
  // Smallest input that yields one frame.
  std::size_t min_samples() const;

  nlohmann::json to_json() const;
  // Rejects unknown keys; missing keys keep their defaults.
  static ModelConfig from_json(const nlohmann::json& j);

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct ModelParams {
  std::map<std::string, Tensor<T>> tensors;

  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;

  std::size_t parameter_count() const;
  void set_requires_grad(bool value);
  void zero_grad();
  // Deep copy with fresh leaves.
  ModelParams clone() const;
  bool all_finite() const;
};

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params);

// Name -> shape for every parameter the config implies.
std::map<std::string, Shape> expected_shapes(const ModelConfig& cfg);

// ShapeMismatchOnLoad when names or shapes differ from the config.
template <typename T>
void check_params(const ModelParams<T>& params, const ModelConfig& cfg);

// Glorot-uniform weights, zero biases, unit/zero norm affines, zero
// rel-bias table and gate logits. Each tensor draws from its own stream
// keyed by name, so the result depends only on the seed.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, Rng& rng);

// Fresh CTC head over a (pre-trained) body.
template <typename T>
void reinit_ctc_head(ModelParams<T>& params, const ModelConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Forward pass. All functions process one utterance.

// waveform [1 x L] -> Z [T x d_model]; per layer: pad, conv1d, group_norm,
// gelu. InputTooShort when T would be 0.
template <typename T>
Tensor<T> cnn_encode(const Tensor<T>& waveform, const ModelParams<T>& params,
                     const ModelConfig& cfg);

// [n_heads x T x T] with bias[h][i][j] = sigmoid(gate_h) * table_h[clip(j - i, -D, D) + D].
template <typename T>
Tensor<T> rel_pos_bias(std::size_t frames, const ModelParams<T>& params, const ModelConfig& cfg);

// Per head: softmax((Q_h K_h^T + bias_h) / sqrt(d_k)) V_h, heads concatenated
// along columns. Q, K, V are [T x d]; bias is [n_heads x T x T] or undefined.
template <typename T>
Tensor<T> attention_with_bias(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              const Tensor<T>& bias, std::size_t n_heads);

// Multi-head self-attention of layer `layer` including the output projection.
template <typename T>
Tensor<T> self_attention(const Tensor<T>& x, const ModelParams<T>& params, std::size_t layer,
                         const Tensor<T>& bias, const ModelConfig& cfg);

template <typename T>
Tensor<T> transformer_forward(const Tensor<T>& z, const ModelParams<T>& params,
                              const ModelConfig& cfg);

// Log-softmax over vocab_size classes per frame.
template <typename T>
Tensor<T> ctc_head(const Tensor<T>& c, const ModelParams<T>& params);

// Log-softmax over pretrain_clusters classes per frame.
template <typename T>
Tensor<T> pretrain_head(const Tensor<T>& c, const ModelParams<T>& params);

template <typename T>
Tensor<T> waveform_tensor(const std::vector<float>& samples);

// cnn_encode -> transformer_forward -> ctc_head.
template <typename T>
Tensor<T> forward_log_probs(const std::vector<float>& samples, const ModelParams<T>& params,
                            const ModelConfig& cfg);

// Greedy transcript of one waveform.
std::string transcribe(const std::vector<float>& samples, const ModelParams<float>& params,
                       const ModelConfig& cfg, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Checkpoints: "TDA1", u32 version, u64 header length, canonical JSON header
// {model_config, params: [{name, shape, dtype, byte_offset}], vocab}, then the
// little-endian f32 payload in header order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
  Vocabulary vocab;
};

std::string encode_checkpoint(const ModelParams<float>& params, const ModelConfig& cfg,
                              const Vocabulary& vocab);
// BadMagic, VersionMismatch, ShapeMismatchOnLoad, CorruptCheckpoint.
Checkpoint decode_checkpoint(std::string_view bytes);

// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const ModelParams<float>& params, const ModelConfig& cfg,
                     const Vocabulary& vocab, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tda
