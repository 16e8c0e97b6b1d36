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

// Two-stage CTC fine-tuning: clean standard-dialect adaptation, then
// noise-augmented dialect specialization at a smaller learning rate, plus
// the ablation variants and an overfitting smoke test.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tda/audio.hpp"
#include "tda/corpus.hpp"
#include "tda/eval.hpp"
#include "tda/model.hpp"
#include "tda/optim.hpp"

namespace tda {

struct TrainConfig {
  int stage = 1;
  double peak_lr = 5e-5;
  std::size_t epochs = 10;
  double warmup_frac = 0.1;
  AdamWConfig adamw;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::vector<double> snr_levels = {0.0, 5.0, 10.0, 20.0};  // stage 2
  double grad_clip_norm = 1.0;                              // <= 0 disables
  std::vector<NoiseSpec> noise_specs;                       // stage 2
  bool noise_augmentation = true;                           // stage 2

  static TrainConfig stage1_defaults();  // lr 5e-5, 10 epochs
  static TrainConfig stage2_defaults();  // lr 1e-5, 20 epochs, four noise kinds

  void validate() const;  // InvalidConfig
};

// InvalidConfig unless stage 2's peak lr is below stage 1's.
void validate_stage_pair(const TrainConfig& stage1, const TrainConfig& stage2);

// One clip per spec at 16 kHz.
std::vector<Waveform> build_noise_bank(const std::vector<NoiseSpec>& specs);

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;       // batch mean
  double grad_norm = 0.0;  // before clipping
  std::string snr;         // per-item SNRs joined by ';', or "clean"
  bool skipped = false;    // non-finite gradient, no update applied
};

struct NoiseDraw {
  std::size_t step = 0;
  std::string utterance_id;
  std::size_t noise_index = 0;
  double snr_db = 0.0;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<NoiseDraw> draws;
  std::vector<double> dev_loss;  // before training, then after every epoch
  std::filesystem::path checkpoint;

  std::size_t mix_calls() const { return draws.size(); }
};

// CSV: step,epoch,lr,loss,grad_norm,snr
void write_run_log(const RunLog& log, const std::filesystem::path& path);

struct StageResult {
  ModelParams<float> params;
  RunLog log;
};

// epochs x ceil(N / batch_size) optimizer steps under lr_schedule. Each batch
// sums per-utterance CTC gradients, averages them, clips and applies AdamW.
// NonFiniteLoss aborts; a non-finite gradient skips the update.
// run_stage1 attaches a fresh CTC head to init and trains on clean audio.
StageResult run_stage1(const ModelConfig& model_cfg, const TrainConfig& cfg, const std::vector<Example>& train,
                       const std::vector<Example>& dev, ModelParams<float> init);

// Continues from init. With noise_augmentation, every item of every batch
// is mixed with a uniformly drawn bank clip at a uniformly drawn SNR.
StageResult run_stage2(const ModelConfig& model_cfg, const TrainConfig& cfg, const std::vector<Example>& train,
                       const std::vector<Example>& dev, const std::vector<Waveform>& noise_bank,
                       ModelParams<float> init);

// Mean CTC loss over the examples.
double mean_ctc_loss(const ModelParams<float>& params, const ModelConfig& cfg, const std::vector<Example>& examples);

// Writes the checkpoint and records its path in the log.
void save_stage(StageResult& result, const ModelConfig& cfg, const Vocabulary& vocab,
                const std::filesystem::path& path);

struct AblationInputs {
  ModelConfig model_cfg;
  TrainConfig stage1;
  TrainConfig stage2;
  std::vector<Example> standard_train;
  std::vector<Example> standard_dev;
  std::vector<Example> dialect_train;
  std::vector<Example> dialect_dev;
  std::vector<Waveform> noise_bank;
  ModelParams<float> pretrained;
};

struct AblationRun {
  StageResult stage1;  // empty params for no_stage1
  StageResult final;
};

// full: stage 1 then noisy stage 2. no_stage1: noisy stage 2 from the
// pre-trained body with a fresh head. no_noise_aug: stage 1 then clean stage 2.
AblationRun run_ablation(AblationVariant variant, const AblationInputs& in);

// All three variants; the stage-1 run shared by full and no_noise_aug is
// computed once.
std::map<AblationVariant, AblationRun> run_ablation_all(const AblationInputs& in);

struct SanityResult {
  std::size_t steps = 0;
  double initial_loss = 0.0;
  double wer = 1.0;
  std::vector<double> losses;
};

struct SanityConfig {
  std::size_t max_steps = 2000;
  double lr = 2e-3;
  std::size_t check_every = 25;
  std::uint64_t seed = 1;
};

// Full-batch training on a handful of utterances until greedy decoding is
// exact. SanityFailed if WER is still above 0 at max_steps.
SanityResult overfit_sanity(const ModelConfig& model_cfg, const std::vector<Example>& examples,
                            const Vocabulary& vocab, const SanityConfig& cfg = {});

}  // namespace tda
