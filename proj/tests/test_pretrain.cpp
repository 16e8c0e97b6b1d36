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

#include <cmath>
#include <fstream>
#include <algorithm>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "doctest.h"
#include "fixtures.hpp"
#include "tda/audio.hpp"
#include "tda/gradcheck.hpp"
#include "tda/ops.hpp"
#include "tda/pretrain.hpp"

using namespace tda;
using tda::testing::code_of;
using tda::testing::random_audio;
using tda::testing::randomize;
using tda::testing::tiny_model_config;

namespace {

FeatureMatrix matrix(std::vector<double> data, std::size_t cols) {
  const std::size_t rows = data.size() / cols;
  return {std::move(data), rows, cols};
}

std::vector<Waveform> speech_clips(std::size_t n, std::uint64_t seed) {
  const char* words[] = {"ami", "tumi", "kal", "bon", "dal", "nodi", "mati", "kobe"};
  Rng rng(seed);
  std::vector<Waveform> out;
  for (std::size_t i = 0; i < n; ++i) {
    VoiceProfile voice = default_voice_profile();
    voice.base_pitch = rng.uniform(100.0, 150.0);
    const std::string text = std::string(words[rng.uniform_int(8)]) + " " + words[rng.uniform_int(8)];
    out.push_back(synth_utterance(text, voice, rng));
  }
  return out;
}

std::vector<const Waveform*> pointers(const std::vector<Waveform>& clips) {
  std::vector<const Waveform*> out;
  for (const Waveform& w : clips) out.push_back(&w);
  return out;
}

}  // namespace

TEST_CASE("kmeans recovers separated blob means") {
  Rng rng(3);
  std::vector<double> data;
  double mean_a[2] = {0, 0}, mean_b[2] = {0, 0};
  for (int i = 0; i < 50; ++i) {
    const double ax = -10 + rng.uniform(-1, 1), ay = 4 + rng.uniform(-1, 1);
    const double bx = 10 + rng.uniform(-1, 1), by = -4 + rng.uniform(-1, 1);
    data.insert(data.end(), {ax, ay, bx, by});
    mean_a[0] += ax / 50, mean_a[1] += ay / 50, mean_b[0] += bx / 50, mean_b[1] += by / 50;
  }
  const FeatureMatrix x = matrix(data, 2);
  Rng fit_rng(9);
  const KMeansResult r = kmeans_fit(x, 2, 50, fit_rng);
  const auto c0 = r.centroids.row(0), c1 = r.centroids.row(1);
  const bool a_first = c0[0] < 0;
  const auto ca = a_first ? c0 : c1, cb = a_first ? c1 : c0;
  CHECK(std::abs(ca[0] - mean_a[0]) < 1e-6);
  CHECK(std::abs(ca[1] - mean_a[1]) < 1e-6);
  CHECK(std::abs(cb[0] - mean_b[0]) < 1e-6);
  CHECK(std::abs(cb[1] - mean_b[1]) < 1e-6);
}

TEST_CASE("kmeans with one point per cluster") {
  const FeatureMatrix x = matrix({0, 0, 1, 0, 0, 1, 5, 5, -3, 2}, 2);
  Rng rng(4);
  const KMeansResult r = kmeans_fit(x, 5, 10, rng);
  CHECK(r.inertia.back() == 0.0);
  CHECK(inertia(x, r.centroids) == 0.0);
  std::vector<int> labels = assign(x, r.centroids);
  std::sort(labels.begin(), labels.end());
  CHECK(labels == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("kmeans inertia never increases and fits are reproducible") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng data_rng(100 + seed);
    std::vector<double> data(300 * 3);
    for (double& v : data) v = data_rng.normal();
    const FeatureMatrix x = matrix(data, 3);
    Rng a(seed), b(seed);
    const KMeansResult r = kmeans_fit(x, 8, 30, a);
    for (std::size_t i = 1; i < r.inertia.size(); ++i) CHECK(r.inertia[i] <= r.inertia[i - 1] * (1 + 1e-12));
    CHECK(std::abs(inertia(x, r.centroids) - r.inertia.back()) <= 1e-9 * r.inertia.back());
    CHECK(kmeans_fit(x, 8, 30, b).centroids.data == r.centroids.data);
  }
}

TEST_CASE("kmeans rejects bad sizes") {
  const FeatureMatrix x = matrix({0, 1, 2}, 1);
  Rng rng(1);
  CHECK(code_of([&] { kmeans_fit(x, 4, 5, rng); }) == ErrorCode::TooFewPoints);
  CHECK(code_of([&] { kmeans_fit(x, 1, 5, rng); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("kmeans reseeds an emptied cluster") {
  // Duplicated points make the seeding pick coincident centroids; every
  // cluster must still end up non-empty when K distinct points exist.
  const FeatureMatrix x = matrix({0, 0, 0, 0, 0, 0, 0, 0, 1, 100}, 1);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const KMeansResult r = kmeans_fit(x, 3, 20, rng);
    CHECK(r.inertia.back() == 0.0);
  }
}

TEST_CASE("assign") {
  const FeatureMatrix c = matrix({0, 0, 2, 0, 0, 2, 5, 5}, 2);
  SUBCASE("exact centroid") { CHECK(assign(matrix({5, 5}, 2), c)[0] == 3); }
  SUBCASE("ties go to the lower index") {
    CHECK(assign(matrix({1, 0}, 2), c)[0] == 0);
    CHECK(assign(matrix({1, 1}, 2), c)[0] == 0);
    CHECK(assign(matrix({2, 2}, 2), c)[0] == 1);
  }
  SUBCASE("dimension mismatch") {
    CHECK(code_of([&] { assign(matrix({1, 2, 3}, 3), c); }) == ErrorCode::DimMismatch);
  }
  SUBCASE("linear-scan oracle") {
    Rng rng(8);
    std::vector<double> cd(7 * 4), pd(100 * 4);
    for (double& v : cd) v = static_cast<double>(rng.uniform_int(5));
    for (double& v : pd) v = static_cast<double>(rng.uniform_int(5)) + 0.5 * static_cast<double>(rng.uniform_int(2));
    const FeatureMatrix cents = matrix(cd, 4), pts = matrix(pd, 4);
    const std::vector<int> got = assign(pts, cents);
    for (std::size_t i = 0; i < 100; ++i) {
      int best = -1;
      double best_d = 0;
      for (std::size_t k = 0; k < 7; ++k) {
        double d = 0;
        for (std::size_t f = 0; f < 4; ++f) d += (pd[i * 4 + f] - cd[k * 4 + f]) * (pd[i * 4 + f] - cd[k * 4 + f]);
        if (best < 0 || d < best_d) best = static_cast<int>(k), best_d = d;
      }
      CHECK(got[i] == best);
    }
  }
}

TEST_CASE("mask spans") {
  Rng rng(5);
  SUBCASE("probability one masks everything") {
    const MaskPlan p = mask_spans(37, 1.0, 3, rng);
    CHECK(p.frames.size() == 37);
  }
  SUBCASE("never empty and within range") {
    for (int trial = 0; trial < 2000; ++trial) {
      const std::size_t t = 1 + rng.uniform_int(30);
      const MaskPlan p = mask_spans(t, 0.001, 1 + rng.uniform_int(12), rng);
      REQUIRE(!p.frames.empty());
      CHECK(p.frames.back() < t);
      CHECK(std::is_sorted(p.frames.begin(), p.frames.end()));
      CHECK(std::adjacent_find(p.frames.begin(), p.frames.end()) == p.frames.end());
    }
  }
  SUBCASE("unit spans follow the binomial rate") {
    // Retries only trigger on an all-empty draw, which has probability
    // 0.8^50 here, so the fraction is Binomial(T, p) / T.
    const std::size_t t = 50;
    const double p = 0.2;
    const int trials = 10000;
    double total = 0;
    for (int i = 0; i < trials; ++i) total += static_cast<double>(mask_spans(t, p, 1, rng).frames.size()) / t;
    const double mean = total / trials;
    const double sigma = std::sqrt(p * (1 - p) / (static_cast<double>(t) * trials));
    CHECK(std::abs(mean - p) < 3 * sigma);
  }
  SUBCASE("spans are clipped and unioned") {
    const MaskPlan p = mask_spans(4, 1.0, 10, rng);
    CHECK(p.frames == std::vector<std::size_t>{0, 1, 2, 3});
  }
  SUBCASE("validation") {
    CHECK(code_of([&] { mask_spans(0, 0.5, 2, rng); }) == ErrorCode::InputTooShort);
    CHECK(code_of([&] { mask_spans(5, 0.5, 0, rng); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { mask_spans(5, 1.5, 2, rng); }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("pseudo-labels are a pure function of the clean audio") {
  const ModelConfig cfg = tiny_model_config();
  Rng rng(6);
  auto params = init_params<float>(cfg, rng);
  std::vector<Waveform> clips;
  for (int i = 0; i < 6; ++i) clips.push_back({random_audio(rng, 80), 16000});
  Rng fit_rng(2);
  const PseudoLabeler labeler = fit_labeler(params, cfg, pointers(clips), 20, 1000, fit_rng);
  CHECK(labeler.centroids.rows == cfg.pretrain_clusters);
  CHECK(labeler.centroids.cols == cfg.d_model);
  // Later changes to the live parameters must not reach the frozen encoder.
  const auto before = labeler.labels(clips[0].samples);
  for (auto& [name, t] : params.tensors) {
    for (float& v : t.mutable_data()) v *= -3.0f;
  }
  CHECK(labeler.labels(clips[0].samples) == before);
  for (int v : before) CHECK((v >= 0 && v < static_cast<int>(cfg.pretrain_clusters)));
}

TEST_CASE("untrained pre-training loss sits near ln K") {
  ModelConfig cfg;
  cfg.vocab_size = 14;
  Rng rng(11);
  const auto params = init_params<float>(cfg, rng);
  const std::vector<Waveform> clips = speech_clips(8, 77);
  Rng fit_rng(3);
  const PseudoLabeler labeler = fit_labeler(params, cfg, pointers(clips), 25, 20000, fit_rng);
  const double ln_k = std::log(static_cast<double>(cfg.pretrain_clusters));
  double total = 0;
  for (const Waveform& w : clips) {
    const MaskPlan plan = mask_spans(cfg.frames_for(w.size()), 0.065, 10, rng);
    total += denoise_pretrain_loss(w, w, params, cfg, labeler, plan).item();
  }
  const double loss = total / static_cast<double>(clips.size());
  MESSAGE("untrained loss " << loss << " vs ln K " << ln_k);
  CHECK(std::abs(loss - ln_k) <= 0.2 * ln_k);
}

TEST_CASE("a head fitted to the labels drives the loss to zero") {
  const ModelConfig cfg = tiny_model_config();
  Rng rng(12);
  auto fparams = init_params<float>(cfg, rng);
  randomize(fparams, rng);
  std::vector<Waveform> clips;
  for (int i = 0; i < 6; ++i) clips.push_back({random_audio(rng, 50), 16000});
  Rng fit_rng(4);
  const PseudoLabeler labeler = fit_labeler(fparams, cfg, pointers(clips), 20, 1000, fit_rng);
  auto params = cast_params<double>(fparams);
  const Waveform& clip = clips[0];
  const MaskPlan plan{{1, 4, 7, 10}, 0.0, 1};
  const std::vector<int> q = labeler.labels(clip.samples);

  // Minimum-norm solve of H_M W = 30 * onehot(q_M), so each masked frame's
  // logit for its label leads the rest by 30.
  const Tensor<double> z = cnn_encode(waveform_tensor<double>(clip.samples), params, cfg);
  const Tensor<double> h =
      transformer_forward(replace_rows(z, plan.frames, params.at("mask_embedding")), params, cfg);
  const std::size_t d = cfg.d_model, k = cfg.pretrain_clusters, m = plan.frames.size();
  Eigen::MatrixXd hm(m, d), y = Eigen::MatrixXd::Zero(m, k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < d; ++c) hm(i, c) = h.data()[plan.frames[i] * d + c];
    y(i, q[plan.frames[i]]) = 30.0;
  }
  const Eigen::MatrixXd w = hm.completeOrthogonalDecomposition().solve(y);
  auto wd = params.tensors.at("pretrain_head.weight").mutable_data();
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t j = 0; j < k; ++j) wd[c * k + j] = w(c, j);
  }
  for (double& b : params.tensors.at("pretrain_head.bias").mutable_data()) b = 0.0;

  const double loss = denoise_pretrain_loss(clip, clip, params, cfg, labeler, plan).item();
  CHECK(loss < 0.01);
}

TEST_CASE("pre-training loss gradient matches finite differences") {
  const ModelConfig cfg = tiny_model_config();
  Rng rng(13);
  auto fparams = init_params<float>(cfg, rng);
  std::vector<Waveform> clips;
  for (int i = 0; i < 4; ++i) clips.push_back({random_audio(rng, 50), 16000});
  Rng fit_rng(5);
  const PseudoLabeler labeler = fit_labeler(fparams, cfg, pointers(clips), 20, 1000, fit_rng);
  auto params = cast_params<double>(fparams);
  randomize(params, rng);
  const Waveform noisy{random_audio(rng, 50), 16000};
  const MaskPlan plan{{0, 3, 4, 5, 9}, 0.0, 1};
  std::vector<Tensor<double>> leaves;
  for (auto& [name, t] : params.tensors) {
    if (name.rfind("ctc_head", 0) != 0) leaves.push_back(t);
  }
  const auto report = finite_diff_report<double>(
      [&] { return denoise_pretrain_loss(clips[0], noisy, params, cfg, labeler, plan); }, leaves);
  MESSAGE("worst leaf " << report.worst_leaf << " err " << report.max_rel_error);
  CHECK(report.max_rel_error < 1e-5);
  CHECK(params.at("mask_embedding").grad().size() == cfg.d_model);
}

TEST_CASE("loss only depends on masked targets") {
  const ModelConfig cfg = tiny_model_config();
  Rng rng(14);
  auto params = init_params<double>(cfg, rng);
  randomize(params, rng);
  const std::vector<float> audio = random_audio(rng, 50);
  const MaskPlan plan{{2, 3, 8}, 0.0, 1};
  std::vector<int> labels(12, 1);
  const double base = masked_prediction_loss(audio, labels, params, cfg, plan).item();
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> perturbed = labels;
    for (std::size_t t = 0; t < 12; ++t) {
      if (t != 2 && t != 3 && t != 8) perturbed[t] = static_cast<int>(rng.uniform_int(cfg.pretrain_clusters));
    }
    CHECK(masked_prediction_loss(audio, perturbed, params, cfg, plan).item() == base);
  }
  labels[3] = 4;
  CHECK(masked_prediction_loss(audio, labels, params, cfg, plan).item() != base);
}

TEST_CASE("pre-training loss validation") {
  const ModelConfig cfg = tiny_model_config();
  Rng rng(15);
  auto params = init_params<float>(cfg, rng);
  std::vector<Waveform> clips{{random_audio(rng, 50), 16000}, {random_audio(rng, 50), 16000}};
  Rng fit_rng(1);
  const PseudoLabeler labeler = fit_labeler(params, cfg, pointers(clips), 5, 100, fit_rng);
  const Waveform longer{random_audio(rng, 60), 16000};
  const MaskPlan plan{{0}, 0.0, 1};
  CHECK(code_of([&] { denoise_pretrain_loss(clips[0], longer, params, cfg, labeler, plan); }) ==
        ErrorCode::LengthMismatch);
  const std::vector<int> short_labels(5, 0);
  CHECK(code_of([&] { masked_prediction_loss(clips[0].samples, short_labels, params, cfg, plan); }) ==
        ErrorCode::LengthMismatch);
}

TEST_CASE("run_pretrain") {
  ModelConfig cfg = tiny_model_config();
  cfg.conv_layers = {{8, 10, 5}, {8, 4, 2}, {8, 4, 2}};
  cfg.norm_groups = 4;
  cfg.pretrain_clusters = 8;
  const std::vector<Waveform> corpus = speech_clips(12, 21);
  std::vector<Waveform> bank;
  for (NoiseKind k : {NoiseKind::White, NoiseKind::Hum}) bank.push_back(synth_noise({k, 3, 1.0}, 16000));

  PretrainConfig pc;
  pc.steps = 120;
  pc.batch_size = 2;
  pc.peak_lr = 3e-3;
  pc.mask_prob = 0.1;
  pc.mask_span = 4;
  pc.kmeans_max_frames = 2000;
  pc.seed = 7;

  SUBCASE("loss decreases and runs repeat exactly") {
    const PretrainResult a = run_pretrain(cfg, pc, corpus, bank);
    REQUIRE(a.log.size() == pc.steps);
    double first = 0, last = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      first += a.log[i].loss;
      last += a.log[pc.steps - 30 + i].loss;
    }
    CHECK(last < first);
    CHECK(a.mix_calls > 0);
    CHECK(a.params.all_finite());
    const PretrainResult b = run_pretrain(cfg, pc, corpus, bank);
    for (const auto& [name, t] : a.params.tensors) {
      const auto x = b.params.at(name).data(), y = t.data();
      CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }

    const auto dir = tda::testing::scratch_dir("pretrain_log");
    write_pretrain_log(a.log, dir / "log.csv");
    std::ifstream in(dir / "log.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "step,loss,p_noisy_applied,snr");
    CHECK(row.rfind("0,", 0) == 0);
  }
  SUBCASE("p_noisy zero never mixes") {
    pc.p_noisy = 0.0;
    pc.steps = 10;
    const PretrainResult r = run_pretrain(cfg, pc, corpus, {});
    CHECK(r.mix_calls == 0);
    for (const PretrainRecord& rec : r.log) {
      CHECK(rec.snr == "clean");
      CHECK(rec.noisy_fraction == 0.0);
    }
  }
  SUBCASE("validation") {
    CHECK(code_of([&] { run_pretrain(cfg, pc, {}, bank); }) == ErrorCode::EmptyCorpus);
    CHECK(code_of([&] { run_pretrain(cfg, pc, corpus, {}); }) == ErrorCode::InvalidConfig);
    pc.warmup_frac = 1.0;
    CHECK(code_of([&] { run_pretrain(cfg, pc, corpus, bank); }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("representation distance") {
  const ModelConfig cfg = tiny_model_config();
  Rng rng(16);
  const auto params = init_params<float>(cfg, rng);
  const std::vector<float> a = random_audio(rng, 50);
  CHECK(representation_distance(params, cfg, a, a) == doctest::Approx(0.0).epsilon(1e-6));
  const std::vector<float> b = random_audio(rng, 50);
  const double d = representation_distance(params, cfg, a, b);
  CHECK(d > 0.0);
  CHECK(d <= 2.0);
  CHECK(code_of([&] { representation_distance(params, cfg, a, random_audio(rng, 51)); }) == ErrorCode::LengthMismatch);
}
