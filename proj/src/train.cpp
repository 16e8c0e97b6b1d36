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

#include "tda/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "tda/ctc.hpp"
#include "tda/error.hpp"

namespace tda {

namespace {

std::string snr_label(double db) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", db);
  return buf;
}

struct Augmenter {
  const std::vector<Waveform>* bank = nullptr;
  const std::vector<double>* snr_levels = nullptr;
  Rng rng{0};
};

StageResult run_stage(const ModelConfig& model_cfg, const TrainConfig& cfg, const std::vector<Example>& train,
                      const std::vector<Example>& dev, ModelParams<float> params, Augmenter* aug) {
  cfg.validate();
  model_cfg.validate();
  check_params(params, model_cfg);
  if (train.empty() && cfg.epochs > 0) throw Error(ErrorCode::EmptyCorpus, "no training utterances");
  params.set_requires_grad(true);

  StageResult result{std::move(params), {}};
  ModelParams<float>& p = result.params;
  RunLog& log = result.log;
  const std::size_t batches = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.epochs * batches;
  if (!dev.empty()) log.dev_loss.push_back(mean_ctc_loss(p, model_cfg, dev));

  AdamW<float> opt(cfg.adamw);
  Rng shuffle(derive_seed(cfg.seed, "shuffle", "stage" + std::to_string(cfg.stage)));
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : batch_plan(train.size(), cfg.batch_size, shuffle)) {
      p.zero_grad();
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.lr = lr_schedule(step, total, cfg.peak_lr, cfg.warmup_frac);
      double loss_sum = 0.0;
      for (std::size_t idx : batch) {
        const Example& ex = train[idx];
        const std::vector<float>* input = &ex.wave.samples;
        Waveform mixed;
        if (aug != nullptr) {
          const std::size_t k = aug->rng.uniform_int(aug->bank->size());
          const double snr = (*aug->snr_levels)[aug->rng.uniform_int(aug->snr_levels->size())];
          mixed = mix_at_snr(ex.wave, (*aug->bank)[k], snr, aug->rng);
          input = &mixed.samples;
          log.draws.push_back({step, ex.utt.id, k, snr});
          if (!rec.snr.empty()) rec.snr += ';';
          rec.snr += snr_label(snr);
        }
        Tensor<float> loss = ctc_loss_node(forward_log_probs(*input, p, model_cfg), ex.target);
        if (!std::isfinite(loss.item())) {
          throw Error(ErrorCode::NonFiniteLoss, "stage " + std::to_string(cfg.stage) + " step " +
                                                    std::to_string(step) + ": loss " + std::to_string(loss.item()) +
                                                    " on utterance " + ex.utt.id);
        }
        loss_sum += loss.item();
        loss.backward();
      }
      if (rec.snr.empty()) rec.snr = "clean";
      scale_grads(p, 1.0 / static_cast<double>(batch.size()));
      rec.loss = loss_sum / static_cast<double>(batch.size());
      rec.grad_norm = clip_grad_norm(p, cfg.grad_clip_norm);
      try {
        opt.step(p, rec.lr);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteGradient) throw;
        rec.skipped = true;
      }
      log.steps.push_back(std::move(rec));
      ++step;
    }
    if (!dev.empty()) log.dev_loss.push_back(mean_ctc_loss(p, model_cfg, dev));
  }
  p.zero_grad();
  return result;
}

}  // namespace

TrainConfig TrainConfig::stage1_defaults() { return {}; }

TrainConfig TrainConfig::stage2_defaults() {
  TrainConfig cfg;
  cfg.stage = 2;
  cfg.peak_lr = 1e-5;
  cfg.epochs = 20;
  for (NoiseKind k : {NoiseKind::White, NoiseKind::BabbleSurrogate, NoiseKind::Hum, NoiseKind::FactorySurrogate}) {
    cfg.noise_specs.push_back({k, 1, 4.0});
  }
  return cfg;
}

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw Error(ErrorCode::InvalidConfig, "stage must be 1 or 2");
  if (!(peak_lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "peak_lr must be positive");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw Error(ErrorCode::InvalidConfig, "warmup_frac must be in (0, 1)");
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (stage == 2 && noise_augmentation) {
    if (snr_levels.empty()) throw Error(ErrorCode::InvalidConfig, "stage 2 needs snr_levels");
    if (noise_specs.empty()) throw Error(ErrorCode::InvalidConfig, "stage 2 needs noise_specs");
  }
}

void validate_stage_pair(const TrainConfig& stage1, const TrainConfig& stage2) {
  if (!(stage2.peak_lr < stage1.peak_lr)) {
    throw Error(ErrorCode::InvalidConfig, "stage-2 peak lr must be below stage 1's");
  }
}

std::vector<Waveform> build_noise_bank(const std::vector<NoiseSpec>& specs) {
  std::vector<Waveform> bank;
  bank.reserve(specs.size());
  for (const NoiseSpec& s : specs) bank.push_back(synth_noise(s, kDefaultSampleRate));
  return bank;
}

void write_run_log(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "step,epoch,lr,loss,grad_norm,snr\n";
  char buf[96];
  for (const StepRecord& r : log.steps) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.6f,%.6f,", r.step, r.epoch, r.lr, r.loss, r.grad_norm);
    out << buf << r.snr << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

double mean_ctc_loss(const ModelParams<float>& params, const ModelConfig& cfg, const std::vector<Example>& examples) {
  if (examples.empty()) throw Error(ErrorCode::EmptyCorpus, "no utterances to score");
  ModelParams<float> frozen = params.clone();
  frozen.set_requires_grad(false);
  double total = 0.0;
  for (const Example& ex : examples) {
    const Tensor<float> lp = forward_log_probs(ex.wave.samples, frozen, cfg);
    total += ctc_loss(lp, ex.target).loss;
  }
  return total / static_cast<double>(examples.size());
}

StageResult run_stage1(const ModelConfig& model_cfg, const TrainConfig& cfg, const std::vector<Example>& train,
                       const std::vector<Example>& dev, ModelParams<float> init) {
  if (cfg.stage != 1) throw Error(ErrorCode::InvalidConfig, "run_stage1 needs a stage-1 config");
  Rng head_rng(derive_seed(cfg.seed, "ctc-head"));
  reinit_ctc_head(init, model_cfg, head_rng);
  return run_stage(model_cfg, cfg, train, dev, std::move(init), nullptr);
}

StageResult run_stage2(const ModelConfig& model_cfg, const TrainConfig& cfg, const std::vector<Example>& train,
                       const std::vector<Example>& dev, const std::vector<Waveform>& noise_bank,
                       ModelParams<float> init) {
  if (cfg.stage != 2) throw Error(ErrorCode::InvalidConfig, "run_stage2 needs a stage-2 config");
  if (!cfg.noise_augmentation) return run_stage(model_cfg, cfg, train, dev, std::move(init), nullptr);
  if (noise_bank.empty()) throw Error(ErrorCode::InvalidConfig, "stage 2 needs a noise bank");
  Augmenter aug{&noise_bank, &cfg.snr_levels, Rng(derive_seed(cfg.seed, "augment"))};
  return run_stage(model_cfg, cfg, train, dev, std::move(init), &aug);
}

void save_stage(StageResult& result, const ModelConfig& cfg, const Vocabulary& vocab,
                const std::filesystem::path& path) {
  save_checkpoint(result.params, cfg, vocab, path);
  result.log.checkpoint = path;
}

namespace {

TrainConfig stage2_variant(const TrainConfig& base, AblationVariant v) {
  TrainConfig cfg = base;
  cfg.noise_augmentation = v != AblationVariant::NoNoiseAug;
  return cfg;
}

StageResult fresh_head(const AblationInputs& in) {
  ModelParams<float> init = in.pretrained.clone();
  Rng head_rng(derive_seed(in.stage2.seed, "ctc-head"));
  reinit_ctc_head(init, in.model_cfg, head_rng);
  return {std::move(init), {}};
}

}  // namespace

AblationRun run_ablation(AblationVariant variant, const AblationInputs& in) {
  validate_stage_pair(in.stage1, in.stage2);
  AblationRun run;
  ModelParams<float> start;
  if (variant == AblationVariant::NoStage1) {
    start = fresh_head(in).params;
  } else {
    run.stage1 = run_stage1(in.model_cfg, in.stage1, in.standard_train, in.standard_dev, in.pretrained.clone());
    start = run.stage1.params.clone();
  }
  run.final = run_stage2(in.model_cfg, stage2_variant(in.stage2, variant), in.dialect_train, in.dialect_dev,
                         in.noise_bank, std::move(start));
  return run;
}

std::map<AblationVariant, AblationRun> run_ablation_all(const AblationInputs& in) {
  validate_stage_pair(in.stage1, in.stage2);
  std::map<AblationVariant, AblationRun> runs;
  const StageResult stage1 =
      run_stage1(in.model_cfg, in.stage1, in.standard_train, in.standard_dev, in.pretrained.clone());
  for (AblationVariant v : kAllVariants) {
    AblationRun run;
    ModelParams<float> start;
    if (v == AblationVariant::NoStage1) {
      start = fresh_head(in).params;
    } else {
      run.stage1 = {stage1.params.clone(), stage1.log};
      start = stage1.params.clone();
    }
    run.final = run_stage2(in.model_cfg, stage2_variant(in.stage2, v), in.dialect_train, in.dialect_dev,
                           in.noise_bank, std::move(start));
    runs.emplace(v, std::move(run));
  }
  return runs;
}

SanityResult overfit_sanity(const ModelConfig& model_cfg, const std::vector<Example>& examples,
                            const Vocabulary& vocab, const SanityConfig& cfg) {
  if (examples.empty()) throw Error(ErrorCode::EmptyCorpus, "overfit_sanity needs utterances");
  Rng rng(derive_seed(cfg.seed, "sanity-init"));
  ModelParams<float> params = init_params<float>(model_cfg, rng);
  AdamWConfig adam;
  adam.weight_decay = 0.0;
  AdamW<float> opt(adam);
  SanityResult result;
  result.initial_loss = mean_ctc_loss(params, model_cfg, examples);

  auto corpus_wer = [&] {
    CorpusScore score;
    for (const Example& ex : examples) score.add(ex.utt.text, transcribe(ex.wave.samples, params, model_cfg, vocab));
    return score.wer();
  };
  while (result.steps < cfg.max_steps) {
    params.zero_grad();
    double loss_sum = 0.0;
    for (const Example& ex : examples) {
      Tensor<float> loss = ctc_loss_node(forward_log_probs(ex.wave.samples, params, model_cfg), ex.target);
      if (!std::isfinite(loss.item())) throw Error(ErrorCode::NonFiniteLoss, "sanity utterance " + ex.utt.id);
      loss_sum += loss.item();
      loss.backward();
    }
    scale_grads(params, 1.0 / static_cast<double>(examples.size()));
    clip_grad_norm(params, 1.0);
    opt.step(params, cfg.lr);
    result.losses.push_back(loss_sum / static_cast<double>(examples.size()));
    ++result.steps;
    if (result.steps % cfg.check_every == 0 || result.steps == cfg.max_steps) {
      result.wer = corpus_wer();
      if (result.wer == 0.0) return result;
    }
  }
  throw Error(ErrorCode::SanityFailed,
              "WER " + std::to_string(result.wer) + " after " + std::to_string(result.steps) + " steps");
}

}  // namespace tda
