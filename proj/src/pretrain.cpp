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

#include "tda/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "tda/error.hpp"
#include "tda/ops.hpp"

namespace tda {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Index of the nearest centroid and its squared distance.
std::pair<int, double> nearest(std::span<const double> x, const FeatureMatrix& c) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.rows; ++k) {
    const double d = sq_dist(x, c.row(k));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return {best, best_d};
}

}  // namespace

KMeansResult kmeans_fit(const FeatureMatrix& x, std::size_t k, std::size_t iters, Rng& rng) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "k-means needs k >= 2");
  if (x.rows < k) {
    throw Error(ErrorCode::TooFewPoints, std::to_string(x.rows) + " points for " + std::to_string(k) + " clusters");
  }
  const std::size_t n = x.rows, d = x.cols;
  KMeansResult result;
  FeatureMatrix& c = result.centroids;
  c.rows = k;
  c.cols = d;
  c.data.reserve(k * d);

  // k-means++ seeding.
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.uniform_int(n);
  for (std::size_t j = 0; j < k; ++j) {
    const auto row = x.row(pick);
    c.data.insert(c.data.end(), row.begin(), row.end());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], sq_dist(x.row(i), row));
      total += dist[i];
    }
    if (j + 1 == k) break;
    if (total <= 0.0) {
      pick = rng.uniform_int(n);
      continue;
    }
    double r = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      r -= dist[i];
      if (r < 0.0 && dist[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }

  std::vector<int> labels(n, -1);
  for (std::size_t it = 0; it <= iters; ++it) {
    bool changed = false;
    double total = 0.0;
    std::vector<double> point_dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [lab, dd] = nearest(x.row(i), c);
      changed |= lab != labels[i];
      labels[i] = lab;
      point_dist[i] = dd;
      total += dd;
    }
    result.inertia.push_back(total);
    if (!changed || it == iters) break;

    std::vector<double> sums(k * d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto lab = static_cast<std::size_t>(labels[i]);
      ++counts[lab];
      const auto row = x.row(i);
      for (std::size_t f = 0; f < d; ++f) sums[lab * d + f] += row[f];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) {
        // Re-seed at the worst-served point; that point's cost drops to zero.
        const auto far = static_cast<std::size_t>(
            std::max_element(point_dist.begin(), point_dist.end()) - point_dist.begin());
        std::copy_n(x.row(far).begin(), d, c.data.begin() + static_cast<std::ptrdiff_t>(j * d));
        point_dist[far] = 0.0;
        continue;
      }
      for (std::size_t f = 0; f < d; ++f) {
        c.data[j * d + f] = sums[j * d + f] / static_cast<double>(counts[j]);
      }
    }
  }
  return result;
}

std::vector<int> assign(const FeatureMatrix& features, const FeatureMatrix& centroids) {
  if (features.cols != centroids.cols) {
    throw Error(ErrorCode::DimMismatch, "features have " + std::to_string(features.cols) +
                                            " dims, centroids " + std::to_string(centroids.cols));
  }
  std::vector<int> out(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) out[i] = nearest(features.row(i), centroids).first;
  return out;
}

double inertia(const FeatureMatrix& features, const FeatureMatrix& centroids) {
  if (features.cols != centroids.cols) throw Error(ErrorCode::DimMismatch, "inertia: dims differ");
  double total = 0.0;
  for (std::size_t i = 0; i < features.rows; ++i) total += nearest(features.row(i), centroids).second;
  return total;
}

FeatureMatrix PseudoLabeler::features(const std::vector<float>& samples) const {
  const Tensor<float> z = cnn_encode(waveform_tensor<float>(samples), encoder, config);
  return {std::vector<double>(z.data().begin(), z.data().end()), z.dim(0), z.dim(1)};
}

std::vector<int> PseudoLabeler::labels(const std::vector<float>& samples) const {
  return assign(features(samples), centroids);
}

PseudoLabeler fit_labeler(const ModelParams<float>& params, const ModelConfig& cfg,
                          const std::vector<const Waveform*>& clean, std::size_t iters,
                          std::size_t max_frames, Rng& rng) {
  PseudoLabeler labeler{cfg, params.clone(), {}};
  labeler.encoder.set_requires_grad(false);
  FeatureMatrix pool;
  pool.cols = cfg.d_model;
  std::vector<std::size_t> order(clean.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i : order) {
    if (pool.rows >= max_frames) break;
    const FeatureMatrix f = labeler.features(clean[i]->samples);
    const std::size_t take = std::min(f.rows, max_frames - pool.rows);
    pool.data.insert(pool.data.end(), f.data.begin(), f.data.begin() + static_cast<std::ptrdiff_t>(take * f.cols));
    pool.rows += take;
  }
  labeler.centroids = kmeans_fit(pool, cfg.pretrain_clusters, iters, rng).centroids;
  return labeler;
}

MaskPlan mask_spans(std::size_t frames, double mask_prob, std::size_t span, Rng& rng) {
  if (frames == 0) throw Error(ErrorCode::InputTooShort, "mask_spans needs at least one frame");
  if (span == 0 || mask_prob < 0.0 || mask_prob > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "mask span must be >= 1 and mask_prob in [0, 1]");
  }
  MaskPlan plan{{}, mask_prob, span};
  std::vector<char> masked(frames, 0);
  constexpr int kRetries = 10;
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    bool any = false;
    for (std::size_t t = 0; t < frames; ++t) {
      if (!rng.bernoulli(mask_prob)) continue;
      any = true;
      for (std::size_t u = t; u < std::min(frames, t + span); ++u) masked[u] = 1;
    }
    if (any) break;
  }
  if (std::find(masked.begin(), masked.end(), 1) == masked.end()) {
    const std::size_t start = rng.uniform_int(frames);
    for (std::size_t u = start; u < std::min(frames, start + span); ++u) masked[u] = 1;
  }
  for (std::size_t t = 0; t < frames; ++t) {
    if (masked[t]) plan.frames.push_back(t);
  }
  return plan;
}

template <typename T>
Tensor<T> masked_prediction_loss(const std::vector<float>& noisy, std::span<const int> labels,
                                 const ModelParams<T>& params, const ModelConfig& cfg, const MaskPlan& plan) {
  const Tensor<T> z = cnn_encode(waveform_tensor<T>(noisy), params, cfg);
  if (labels.size() != z.dim(0)) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels for " +
                                               std::to_string(z.dim(0)) + " frames");
  }
  const Tensor<T> masked = replace_rows(z, plan.frames, params.at("mask_embedding"));
  const Tensor<T> lp = pretrain_head(transformer_forward(masked, params, cfg), params);
  return nll_rows(lp, labels, plan.frames);
}

template <typename T>
Tensor<T> denoise_pretrain_loss(const Waveform& clean, const Waveform& noisy, const ModelParams<T>& params,
                                const ModelConfig& cfg, const PseudoLabeler& labeler, const MaskPlan& plan) {
  if (clean.size() != noisy.size()) {
    throw Error(ErrorCode::LengthMismatch, "clean has " + std::to_string(clean.size()) + " samples, noisy " +
                                               std::to_string(noisy.size()));
  }
  const std::vector<int> q = labeler.labels(clean.samples);
  return masked_prediction_loss(noisy.samples, q, params, cfg, plan);
}

double representation_distance(const ModelParams<float>& params, const ModelConfig& cfg,
                               const std::vector<float>& clean, const std::vector<float>& noisy) {
  if (clean.size() != noisy.size()) throw Error(ErrorCode::LengthMismatch, "representation_distance");
  auto encode = [&](const std::vector<float>& x) {
    return transformer_forward(cnn_encode(waveform_tensor<float>(x), params, cfg), params, cfg);
  };
  const Tensor<float> a = encode(clean), b = encode(noisy);
  const std::size_t frames = a.dim(0), d = a.dim(1);
  double total = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const double x = a.data()[t * d + i], y = b.data()[t * d + i];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    total += 1.0 - dot / std::max(std::sqrt(na * nb), 1e-12);
  }
  return total / static_cast<double>(frames);
}

void PretrainConfig::validate() const {
  if (steps == 0 || batch_size == 0) throw Error(ErrorCode::InvalidConfig, "pretrain steps and batch_size must be >= 1");
  if (!(peak_lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "pretrain peak_lr must be positive");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw Error(ErrorCode::InvalidConfig, "warmup_frac must be in (0, 1)");
  if (p_noisy < 0.0 || p_noisy > 1.0) throw Error(ErrorCode::InvalidConfig, "p_noisy must be in [0, 1]");
  if (p_noisy > 0.0 && snr_levels.empty()) throw Error(ErrorCode::InvalidConfig, "pretrain snr_levels empty");
  if (mask_span == 0 || mask_prob <= 0.0 || mask_prob > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "mask_prob must be in (0, 1] and mask_span >= 1");
  }
}

PretrainResult run_pretrain(const ModelConfig& model_cfg, const PretrainConfig& cfg,
                            const std::vector<Waveform>& corpus, const std::vector<Waveform>& noise_bank) {
  cfg.validate();
  model_cfg.validate();
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no pre-training audio");
  if (cfg.p_noisy > 0.0 && noise_bank.empty()) throw Error(ErrorCode::InvalidConfig, "empty noise bank");

  Rng init_rng(derive_seed(cfg.seed, "init"));
  PretrainResult result{init_params<float>(model_cfg, init_rng), {}, {}, 0};
  ModelParams<float>& params = result.params;

  std::vector<const Waveform*> usable;
  for (const Waveform& w : corpus) {
    if (w.size() >= model_cfg.min_samples()) usable.push_back(&w);
  }
  if (usable.empty()) throw Error(ErrorCode::EmptyCorpus, "every clip is shorter than one frame");
  Rng kmeans_rng(derive_seed(cfg.seed, "kmeans"));
  result.labeler = fit_labeler(params, model_cfg, usable, cfg.kmeans_iters, cfg.kmeans_max_frames, kmeans_rng);
  std::vector<std::vector<int>> labels;
  labels.reserve(usable.size());
  for (const Waveform* w : usable) labels.push_back(result.labeler.labels(w->samples));

  AdamW<float> opt(cfg.adamw);
  Rng rng(derive_seed(cfg.seed, "pretrain-steps"));
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    params.zero_grad();
    PretrainRecord rec;
    rec.step = step;
    std::size_t noisy = 0;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = rng.uniform_int(usable.size());
      const Waveform& clean = *usable[idx];
      std::vector<float> input = clean.samples;
      if (rng.bernoulli(cfg.p_noisy)) {
        const Waveform& noise = noise_bank[rng.uniform_int(noise_bank.size())];
        const double snr = cfg.snr_levels[rng.uniform_int(cfg.snr_levels.size())];
        input = mix_at_snr(clean, noise, snr, rng).samples;
        ++result.mix_calls;
        ++noisy;
        if (!rec.snr.empty()) rec.snr += ';';
        rec.snr += std::to_string(static_cast<int>(std::lround(snr)));
      }
      const MaskPlan plan = mask_spans(labels[idx].size(), cfg.mask_prob, cfg.mask_span, rng);
      Tensor<float> loss = masked_prediction_loss(input, labels[idx], params, model_cfg, plan);
      if (!std::isfinite(loss.item())) throw Error(ErrorCode::NonFiniteLoss, "pre-training step " + std::to_string(step));
      loss_sum += loss.item();
      loss.backward();
    }
    scale_grads(params, 1.0 / static_cast<double>(cfg.batch_size));
    clip_grad_norm(params, cfg.grad_clip_norm);
    opt.step(params, lr_schedule(step, cfg.steps, cfg.peak_lr, cfg.warmup_frac));
    rec.loss = loss_sum / static_cast<double>(cfg.batch_size);
    rec.noisy_fraction = static_cast<double>(noisy) / static_cast<double>(cfg.batch_size);
    if (rec.snr.empty()) rec.snr = "clean";
    result.log.push_back(std::move(rec));
  }
  return result;
}

void write_pretrain_log(const std::vector<PretrainRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "step,loss,p_noisy_applied,snr\n";
  char buf[64];
  for (const PretrainRecord& r : log) {
    std::snprintf(buf, sizeof buf, "%.6f,%.4f", r.loss, r.noisy_fraction);
    out << r.step << ',' << buf << ',' << r.snr << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

#define TDA_INSTANTIATE_PRETRAIN(T)                                                               \
  template Tensor<T> masked_prediction_loss<T>(const std::vector<float>&, std::span<const int>,   \
                                               const ModelParams<T>&, const ModelConfig&,         \
                                               const MaskPlan&);                                  \
  template Tensor<T> denoise_pretrain_loss<T>(const Waveform&, const Waveform&,                   \
                                              const ModelParams<T>&, const ModelConfig&,          \
                                              const PseudoLabeler&, const MaskPlan&);

TDA_INSTANTIATE_PRETRAIN(float)
TDA_INSTANTIATE_PRETRAIN(double)

}  // namespace tda
