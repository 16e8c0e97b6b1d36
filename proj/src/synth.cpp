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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tda/audio.hpp"
#include "tda/error.hpp"
#include "tda/text.hpp"

namespace tda {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kF1Gain = 0.5;
constexpr double kF2Gain = 0.35;
constexpr double kPitchGain = 0.1;
constexpr double kRampMs = 5.0;
constexpr double kJitter = 0.01;

}  // namespace

VoiceProfile default_voice_profile() {
  // f1 from {300, 420, 580, 800} Hz, f2 from {1100, 1500, 2000, 2700} Hz.
  VoiceProfile p;
  p.formant_table = {
      {U'a', {800, 1500}}, {U'b', {420, 1100}}, {U'd', {420, 2000}}, {U'e', {580, 2000}},
      {U'i', {300, 2700}}, {U'k', {800, 2700}}, {U'l', {420, 1500}}, {U'm', {300, 1500}},
      {U'n', {300, 2000}}, {U'o', {580, 1100}}, {U't', {580, 2700}}, {U'u', {300, 1100}},
  };
  return p;
}

void VoiceProfile::validate(int sample_rate) const {
  if (!(char_duration > 0.0) || !(gap_duration > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "voice durations must be positive");
  }
  if (!(accent_factor > 0.0) || !(base_pitch > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "accent factor and pitch must be positive");
  }
  const double nyquist = sample_rate / 2.0;
  double highest = base_pitch;
  for (const auto& [c, f] : formant_table) highest = std::max({highest, f.f1, f.f2});
  if (highest * accent_factor * (1.0 + kJitter) >= nyquist) {
    throw Error(ErrorCode::InvalidConfig, "scaled frequency reaches Nyquist");
  }
}

std::size_t char_samples(const VoiceProfile& profile, int sample_rate) {
  return static_cast<std::size_t>(std::llround(profile.char_duration * sample_rate / 1000.0));
}

std::size_t gap_samples(const VoiceProfile& profile, int sample_rate) {
  return static_cast<std::size_t>(std::llround(profile.gap_duration * sample_rate / 1000.0));
}

Waveform synth_utterance(std::string_view text, const VoiceProfile& profile, Rng& rng,
                         int sample_rate) {
  profile.validate(sample_rate);
  const std::u32string chars = utf8_to_u32(nfc(text));
  for (char32_t c : chars) {
    if (!is_space(c) && !profile.formant_table.contains(c)) {
      throw Error(ErrorCode::UnknownCharacter, "no formants for '" + u32_to_utf8(c) + "'");
    }
  }
  Waveform wave;
  wave.sample_rate = sample_rate;
  const std::size_t seg = char_samples(profile, sample_rate);
  const std::size_t gap = gap_samples(profile, sample_rate);
  if (chars.empty()) {
    wave.samples.assign(std::max<std::size_t>(gap, 1), 0.0f);
    return wave;
  }
  const std::size_t ramp = std::min(
      seg / 2, static_cast<std::size_t>(std::llround(kRampMs * sample_rate / 1000.0)));
  const double sr = sample_rate;
  for (char32_t c : chars) {
    if (is_space(c)) {
      wave.samples.insert(wave.samples.end(), gap, 0.0f);
      continue;
    }
    const Formants& f = profile.formant_table.at(c);
    const double f1 = f.f1 * profile.accent_factor * (1.0 + rng.uniform(-kJitter, kJitter));
    const double f2 = f.f2 * profile.accent_factor * (1.0 + rng.uniform(-kJitter, kJitter));
    const double f0 = profile.base_pitch * profile.accent_factor;
    const double ph1 = rng.uniform(0.0, kTwoPi);
    const double ph2 = rng.uniform(0.0, kTwoPi);
    const double ph0 = rng.uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < seg; ++i) {
      const double t = static_cast<double>(i) / sr;
      double env = 1.0;
      if (ramp > 0) {
        const std::size_t edge = std::min(i, seg - 1 - i);
        if (edge < ramp) {
          env = 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(edge) + 0.5) /
                                     static_cast<double>(ramp));
        }
      }
      const double v = kF1Gain * std::sin(kTwoPi * f1 * t + ph1) +
                       kF2Gain * std::sin(kTwoPi * f2 * t + ph2) +
                       kPitchGain * std::sin(kTwoPi * f0 * t + ph0);
      wave.samples.push_back(static_cast<float>(env * v));
    }
  }
  return wave;
}

}  // namespace tda
