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

// Masked denoising pre-training: K-means pseudo-labels from clean-speech
// features, span masking of noisy features, and cross-entropy of the clean
// labels over the masked frames.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tda/audio.hpp"
#include "tda/model.hpp"
#include "tda/optim.hpp"
#include "tda/rng.hpp"

namespace tda {

// Row-major [rows x cols].
struct FeatureMatrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct KMeansResult {
  FeatureMatrix centroids;
  std::vector<double> inertia;  // after each assignment pass, non-increasing
};

// k-means++ seeding then Lloyd iterations (stopping early once assignments
// are stable). An emptied cluster is re-seeded at the point farthest from
// its centroid. TooFewPoints when rows < k; InvalidConfig when k < 2.
KMeansResult kmeans_fit(const FeatureMatrix& features, std::size_t k, std::size_t iters, Rng& rng);

// Nearest centroid by squared distance, lowest index on ties. DimMismatch.
std::vector<int> assign(const FeatureMatrix& features, const FeatureMatrix& centroids);

// Sum of squared distances to the assigned centroids.
double inertia(const FeatureMatrix& features, const FeatureMatrix& centroids);

// Clusters a frozen copy of the CNN encoder's clean-speech features.
struct PseudoLabeler {
  ModelConfig config;
  ModelParams<float> encoder;  // frozen snapshot
  FeatureMatrix centroids;

  FeatureMatrix features(const std::vector<float>& samples) const;
  std::vector<int> labels(const std::vector<float>& samples) const;
};

// Fits the labeler on up to max_frames frames drawn from the clean clips.
PseudoLabeler fit_labeler(const ModelParams<float>& params, const ModelConfig& cfg,
                          const std::vector<const Waveform*>& clean, std::size_t iters,
                          std::size_t max_frames, Rng& rng);

struct MaskPlan {
  std::vector<std::size_t> frames;  // sorted, unique, non-empty
  double mask_prob = 0.0;
  std::size_t span = 0;
};

// Each frame starts a span with probability mask_prob; spans are clipped at
// T and unioned. An empty draw is retried, then one random span is forced.
MaskPlan mask_spans(std::size_t frames, double mask_prob, std::size_t span, Rng& rng);

// Masked frames of cnn_encode(noisy) are replaced by the mask embedding;
// loss = mean over masked t of -log p(labels[t]) from the pre-train head.
template <typename T>
Tensor<T> masked_prediction_loss(const std::vector<float>& noisy, std::span<const int> labels,
                                 const ModelParams<T>& params, const ModelConfig& cfg,
                                 const MaskPlan& plan);

// labels = labeler.labels(clean). LengthMismatch when the clips differ in length.
template <typename T>
Tensor<T> denoise_pretrain_loss(const Waveform& clean, const Waveform& noisy,
                                const ModelParams<T>& params, const ModelConfig& cfg,
                                const PseudoLabeler& labeler, const MaskPlan& plan);

// Mean over frames of 1 - cos(C_clean[t], C_noisy[t]) for the final
// Transformer layer, unmasked.
double representation_distance(const ModelParams<float>& params, const ModelConfig& cfg,
                               const std::vector<float>& clean, const std::vector<float>& noisy);

struct PretrainConfig {
  std::size_t steps = 600;
  std::size_t batch_size = 4;
  double peak_lr = 1e-3;
  double warmup_frac = 0.1;
  AdamWConfig adamw;
  double grad_clip_norm = 1.0;
  double mask_prob = 0.065;
  std::size_t mask_span = 10;
  double p_noisy = 0.5;
  std::vector<double> snr_levels = {0.0, 5.0, 10.0, 20.0};
  std::size_t kmeans_iters = 25;
  std::size_t kmeans_max_frames = 20000;
  std::uint64_t seed = 1;

  void validate() const;  // InvalidConfig
};

struct PretrainRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double noisy_fraction = 0.0;  // share of batch items that received noise
  std::string snr;              // applied SNRs joined by ';', or "clean"
};

struct PretrainResult {
  ModelParams<float> params;
  PseudoLabeler labeler;
  std::vector<PretrainRecord> log;
  std::size_t mix_calls = 0;
};

// Steps of: sample utterances; with probability p_noisy mix a random noise
// clip at a random SNR from snr_levels; span-mask; masked prediction of the
// clean pseudo-labels; AdamW under the warmup/decay schedule.
PretrainResult run_pretrain(const ModelConfig& model_cfg, const PretrainConfig& cfg,
                            const std::vector<Waveform>& corpus, const std::vector<Waveform>& noise_bank);

// CSV: step,loss,p_noisy_applied,snr
void write_pretrain_log(const std::vector<PretrainRecord>& log, const std::filesystem::path& path);

}  // namespace tda
