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
#include <algorithm>
#include <numbers>
#include <string>

#include "tda/audio.hpp"
#include "tda/error.hpp"
#include "tda/text.hpp"

namespace tda {

double signal_power(std::span<const float> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (float v : samples) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc / static_cast<double>(samples.size());
}

double signal_power(const Waveform& wave) { return signal_power(wave.samples); }

double snr_db(double speech_power, double noise_power) {
  if (noise_power <= 0.0) throw Error(ErrorCode::SilentNoise, "noise power is zero");
  return 10.0 * std::log10(speech_power / noise_power);
}

double snr_db(const Waveform& speech, const Waveform& noise) {
  return snr_db(signal_power(speech), signal_power(noise));
}

double noise_gain(double speech_power, double noise_power, double target_db) {
  if (speech_power <= 0.0) throw Error(ErrorCode::SilentSpeech, "speech power is zero");
  if (noise_power <= 0.0) throw Error(ErrorCode::SilentNoise, "noise power is zero");
  return std::sqrt(speech_power / (noise_power * std::pow(10.0, target_db / 10.0)));
}

MixResult mix_at_snr_detailed(const Waveform& speech, const Waveform& noise, double target_db,
                              Rng& rng) {
  if (speech.sample_rate != noise.sample_rate) {
    throw Error(ErrorCode::UnsupportedFormat, "sample rates differ: " +
                                                  std::to_string(speech.sample_rate) + " vs " +
                                                  std::to_string(noise.sample_rate));
  }
  if (speech.samples.empty()) throw Error(ErrorCode::SilentSpeech, "empty speech");
  if (noise.samples.empty()) throw Error(ErrorCode::SilentNoise, "empty noise");
  const double p_speech = signal_power(speech);
  if (p_speech <= 0.0) throw Error(ErrorCode::SilentSpeech, "speech power is zero");

  const std::size_t len = speech.size();
  MixResult result;
  std::vector<float> segment(len);
  if (noise.size() >= len) {
    result.offset = rng.uniform_int(noise.size() - len + 1);
    std::copy_n(noise.samples.begin() + static_cast<std::ptrdiff_t>(result.offset), len,
                segment.begin());
  } else {
    result.offset = rng.uniform_int(noise.size());
    for (std::size_t i = 0; i < len; ++i) segment[i] = noise.samples[(result.offset + i) % noise.size()];
  }
  result.gain = noise_gain(p_speech, signal_power(segment), target_db);

  result.scaled_noise.sample_rate = speech.sample_rate;
  result.scaled_noise.samples.resize(len);
  result.mixed.sample_rate = speech.sample_rate;
  result.mixed.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    const float n = static_cast<float>(result.gain * segment[i]);
    result.scaled_noise.samples[i] = n;
    result.mixed.samples[i] = speech.samples[i] + n;
  }
  return result;
}

Waveform mix_at_snr(const Waveform& speech, const Waveform& noise, double target_db, Rng& rng) {
  return mix_at_snr_detailed(speech, noise, target_db, rng).mixed;
}

std::string_view noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::White:
      return "white";
    case NoiseKind::BabbleSurrogate:
      return "babble_surrogate";
    case NoiseKind::Hum:
      return "hum";
    case NoiseKind::FactorySurrogate:
      return "factory_surrogate";
  }
  return "white";
}

NoiseKind parse_noise_kind(std::string_view name) {
  for (NoiseKind k : {NoiseKind::White, NoiseKind::BabbleSurrogate, NoiseKind::Hum,
                      NoiseKind::FactorySurrogate}) {
    if (noise_kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown noise kind '" + std::string(name) + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<float> white(std::size_t n, Rng& rng) {
  std::vector<float> out(n);
  for (float& v : out) v = static_cast<float>(rng.uniform(-kWhiteNoiseAmplitude, kWhiteNoiseAmplitude));
  return out;
}

std::vector<float> hum(std::size_t n, int sample_rate, Rng& rng) {
  constexpr double amplitudes[] = {0.4, 0.2, 0.12, 0.08};
  std::vector<float> out(n, 0.0f);
  for (int h = 0; h < 4; ++h) {
    const double freq = 50.0 * (h + 1);
    const double phase = rng.uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] += static_cast<float>(amplitudes[h] *
                                   std::sin(kTwoPi * freq * static_cast<double>(i) / sample_rate + phase));
    }
  }
  return out;
}

std::vector<float> babble(std::size_t n, int sample_rate, Rng& rng) {
  constexpr int kTalkers = 8;
  constexpr double kTalkerGain = 0.3;
  VoiceProfile profile = default_voice_profile();
  std::u32string letters;
  for (const auto& [c, f] : profile.formant_table) letters.push_back(c);

  std::vector<float> out(n, 0.0f);
  for (int t = 0; t < kTalkers; ++t) {
    profile.accent_factor = rng.uniform(0.9, 1.12);
    profile.base_pitch = rng.uniform(90.0, 220.0);
    // Random pseudo-words until the talker covers the clip from a random start.
    std::vector<float> stream;
    const std::size_t start = rng.uniform_int(std::max<std::size_t>(n / 2, 1));
    while (stream.size() < n + start) {
      std::u32string sentence;
      const std::size_t words = 2 + rng.uniform_int(4);
      for (std::size_t w = 0; w < words; ++w) {
        if (w) sentence.push_back(U' ');
        const std::size_t len = 2 + rng.uniform_int(3);
        for (std::size_t k = 0; k < len; ++k) sentence.push_back(letters[rng.uniform_int(letters.size())]);
      }
      sentence.push_back(U' ');
      const Waveform part = synth_utterance(u32_to_utf8(sentence), profile, rng, sample_rate);
      stream.insert(stream.end(), part.samples.begin(), part.samples.end());
    }
    for (std::size_t i = 0; i < n; ++i) out[i] += static_cast<float>(kTalkerGain * stream[start + i]);
  }
  return out;
}

std::vector<float> factory(std::size_t n, int sample_rate, Rng& rng) {
  // RBJ band-pass biquad, 1 kHz centre, Q 0.8.
  const double w0 = kTwoPi * 1000.0 / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * 0.8);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;

  const std::vector<float> src = white(n, rng);
  std::vector<float> out(n);
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = src[i];
    const double y0 = b0 * x0 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x0;
    y2 = y1;
    y1 = y0;
    out[i] = static_cast<float>(y0);
  }
  // Machine impacts: a decaying broadband burst every 250 ms.
  const std::size_t period = static_cast<std::size_t>(0.25 * sample_rate);
  const std::size_t burst = static_cast<std::size_t>(0.03 * sample_rate);
  const std::size_t phase = rng.uniform_int(period);
  for (std::size_t startpos = phase; startpos < n; startpos += period) {
    for (std::size_t k = 0; k < burst && startpos + k < n; ++k) {
      const double env = std::exp(-5.0 * static_cast<double>(k) / static_cast<double>(burst));
      out[startpos + k] += static_cast<float>(0.6 * env * rng.uniform(-1.0, 1.0));
    }
  }
  return out;
}

}  // namespace

Waveform synth_noise(const NoiseSpec& spec, int sample_rate) {
  if (!(spec.duration > 0.0)) throw Error(ErrorCode::InvalidConfig, "noise duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(spec.duration * sample_rate));
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "noise shorter than one sample");
  Rng rng(derive_seed(spec.seed, "noise", noise_kind_name(spec.kind)));
  Waveform wave;
  wave.sample_rate = sample_rate;
  switch (spec.kind) {
    case NoiseKind::White:
      wave.samples = white(n, rng);
      break;
    case NoiseKind::Hum:
      wave.samples = hum(n, sample_rate, rng);
      break;
    case NoiseKind::BabbleSurrogate:
      wave.samples = babble(n, sample_rate, rng);
      break;
    case NoiseKind::FactorySurrogate:
      wave.samples = factory(n, sample_rate, rng);
      break;
  }
  return wave;
}

}  // namespace tda
