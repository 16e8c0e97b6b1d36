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

// Waveforms, PCM16 WAV files, power/SNR arithmetic, SNR-exact mixing, and
// the synthetic speech and noise generators used in place of recorded data.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tda/rng.hpp"

namespace tda {

inline constexpr int kDefaultSampleRate = 16000;

// Mono samples, nominally in [-1, 1]. Values may exceed that range while in
// memory; write_wav clamps.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// ---------------------------------------------------------------------------
// WAV I/O: RIFF/WAVE, PCM 16-bit, mono, little-endian.

// Throws MalformedWav (truncated or inconsistent container), UnsupportedFormat
// (non-PCM, channels != 1, bits != 16) or IoError.
Waveform read_wav(const std::filesystem::path& path);
Waveform parse_wav(std::string_view bytes);

void write_wav(const std::filesystem::path& path, const Waveform& wave);
std::string encode_wav(const Waveform& wave);

// ---------------------------------------------------------------------------
// Power and SNR. Power is the whole-clip mean square.

double signal_power(const Waveform& wave);
double signal_power(std::span<const float> samples);

// 10 log10(P_speech / P_noise). SilentNoise when P_noise == 0.
double snr_db(const Waveform& speech, const Waveform& noise);
double snr_db(double speech_power, double noise_power);

// Amplitude factor a with 10 log10(P_speech / (a^2 P_noise)) == target_db.
double noise_gain(double speech_power, double noise_power, double target_db);

struct MixResult {
  Waveform mixed;
  Waveform scaled_noise;  // a * segment, same length as the speech
  double gain = 0.0;
  std::size_t offset = 0;  // start of the noise segment
};

// speech + a * segment, where the segment is a seeded random crop of the
// noise (or a loop of it from a random offset when the noise is shorter) and
// a is chosen so the measured SNR equals target_db. Errors: SilentSpeech,
// SilentNoise, UnsupportedFormat on sample-rate mismatch.
MixResult mix_at_snr_detailed(const Waveform& speech, const Waveform& noise, double target_db,
                              Rng& rng);
Waveform mix_at_snr(const Waveform& speech, const Waveform& noise, double target_db, Rng& rng);

// ---------------------------------------------------------------------------
// Noise surrogates.

enum class NoiseKind { White, BabbleSurrogate, Hum, FactorySurrogate };

std::string_view noise_kind_name(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);  // InvalidConfig when unknown

struct NoiseSpec {
  NoiseKind kind = NoiseKind::White;
  std::uint64_t seed = 0;
  double duration = 4.0;  // seconds
};

// Uniform white noise amplitude; variance is kWhiteNoiseAmplitude^2 / 3.
inline constexpr double kWhiteNoiseAmplitude = 0.5;

// Deterministic per spec.
//   white   iid uniform in [-A, A]
//   hum     50 Hz fundamental plus harmonics at 100, 150, 200 Hz
//   babble  eight overlaid low-level toy talkers
//   factory band-limited noise with periodic impulsive bursts
Waveform synth_noise(const NoiseSpec& spec, int sample_rate = kDefaultSampleRate);

// ---------------------------------------------------------------------------
// Toy speech synthesizer.

struct Formants {
  double f1 = 0.0;
  double f2 = 0.0;
};

struct VoiceProfile {
  double base_pitch = 120.0;  // Hz
  std::map<char32_t, Formants> formant_table;
  double char_duration = 80.0;  // ms
  double gap_duration = 80.0;   // ms
  double accent_factor = 1.0;   // multiplies every frequency

  // InvalidConfig when a scaled frequency reaches Nyquist or a duration is
  // not positive.
  void validate(int sample_rate = kDefaultSampleRate) const;
};

// The 12-letter synthetic alphabet with its formant pairs.
VoiceProfile default_voice_profile();

std::size_t char_samples(const VoiceProfile& profile, int sample_rate = kDefaultSampleRate);
std::size_t gap_samples(const VoiceProfile& profile, int sample_rate = kDefaultSampleRate);

// One two-tone segment per character (frequencies scaled by accent_factor,
// +-1% seeded jitter), gap_duration of silence per space. Empty text gives a
// single gap. UnknownCharacter for characters missing from the table.
Waveform synth_utterance(std::string_view text, const VoiceProfile& profile, Rng& rng,
                         int sample_rate = kDefaultSampleRate);

}  // namespace tda
