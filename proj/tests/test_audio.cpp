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
#include <complex>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "tda/audio.hpp"
#include "tda/error.hpp"

using namespace tda;

namespace {

constexpr double kPi = std::numbers::pi;

Waveform sine(double freq, double amplitude, std::size_t n, int sr = kDefaultSampleRate) {
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amplitude * std::sin(2 * kPi * freq * static_cast<double>(i) / sr));
  }
  return w;
}

Waveform random_wave(Rng& rng, std::size_t n, double amp) {
  Waveform w;
  w.samples.resize(n);
  for (float& v : w.samples) v = static_cast<float>(rng.uniform(-amp, amp));
  return w;
}

// |X_k|^2 by direct summation.
double dft_energy(const std::vector<float>& x, std::size_t k) {
  std::complex<double> acc = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += static_cast<double>(x[i]) * std::polar(1.0, -2 * kPi * static_cast<double>(k * i) / n);
  }
  return std::norm(acc);
}

std::size_t dft_peak(const std::vector<float>& x, std::size_t lo_bin, std::size_t hi_bin) {
  std::size_t best = lo_bin;
  double best_e = -1;
  for (std::size_t k = lo_bin; k <= hi_bin; ++k) {
    const double e = dft_energy(x, k);
    if (e > best_e) {
      best_e = e;
      best = k;
    }
  }
  return best;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

std::string header(std::uint16_t format, std::uint16_t channels, std::uint16_t bits) {
  Waveform w = sine(440, 0.5, 100);
  std::string bytes = encode_wav(w);
  bytes[20] = static_cast<char>(format & 0xFF);
  bytes[22] = static_cast<char>(channels);
  bytes[34] = static_cast<char>(bits);
  return bytes;
}

}  // namespace

TEST_CASE("wav round trip and errors") {
  const Waveform tone = sine(1000.0, 0.9, 16000);
  const auto path = std::filesystem::temp_directory_path() / "tda_test_tone.wav";
  write_wav(path, tone);
  const Waveform back = read_wav(path);
  REQUIRE(back.size() == tone.size());
  CHECK(back.sample_rate == 16000);
  double worst = 0;
  for (std::size_t i = 0; i < tone.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(back.samples[i]) - tone.samples[i]));
  }
  CHECK(worst <= 1.0 / 32768.0);
  std::filesystem::remove(path);

  SUBCASE("clamped at export") {
    Waveform loud;
    loud.samples = {1.7f, -3.0f, 0.25f};
    const Waveform b = parse_wav(encode_wav(loud));
    CHECK(b.samples[0] == doctest::Approx(32767.0 / 32768.0));
    CHECK(b.samples[1] == -1.0f);
    CHECK(b.samples[2] == 0.25f);
  }
  SUBCASE("truncated header") {
    const std::string bytes = encode_wav(tone).substr(0, 30);
    CHECK(code_of([&] { parse_wav(bytes); }) == ErrorCode::MalformedWav);
    CHECK(code_of([&] { parse_wav("RIFF"); }) == ErrorCode::MalformedWav);
  }
  SUBCASE("truncated data") {
    const std::string bytes = encode_wav(tone);
    CHECK(code_of([&] { parse_wav(bytes.substr(0, bytes.size() - 10)); }) == ErrorCode::MalformedWav);
  }
  SUBCASE("unsupported layouts") {
    CHECK(code_of([&] { parse_wav(header(1, 2, 16)); }) == ErrorCode::UnsupportedFormat);
    CHECK(code_of([&] { parse_wav(header(1, 1, 8)); }) == ErrorCode::UnsupportedFormat);
    CHECK(code_of([&] { parse_wav(header(3, 1, 16)); }) == ErrorCode::UnsupportedFormat);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { read_wav("/nonexistent/x.wav"); }) == ErrorCode::IoError);
  }
}

TEST_CASE("signal power and snr") {
  Waveform zeros;
  zeros.samples.assign(100, 0.0f);
  CHECK(signal_power(zeros) == 0.0);
  // 1 kHz at 16 kHz: 16 samples per period, 1000 whole periods.
  CHECK(signal_power(sine(1000.0, 1.0, 16000)) == doctest::Approx(0.5).epsilon(1e-6));
  Waveform half;
  half.samples.assign(50, 0.5f);
  CHECK(signal_power(half) == 0.25);

  CHECK(snr_db(1.0, 1.0) == 0.0);
  CHECK(snr_db(10.0, 1.0) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(std::abs(snr_db(1.0, 0.25) - 6.020599913279624) < 1e-12);
  CHECK(code_of([&] { snr_db(half, zeros); }) == ErrorCode::SilentNoise);
}

TEST_CASE("mix_at_snr") {
  SUBCASE("analytic gains") {
    CHECK(std::abs(noise_gain(1.0, 1.0, 10.0) - std::pow(10.0, -0.5)) < 1e-12);
    CHECK(noise_gain(1.0, 1.0, 0.0) == 1.0);
    CHECK(std::abs(noise_gain(0.3, 0.7, 12.0) / noise_gain(0.3, 0.7, 12.0 + 20 * std::log10(2.0)) -
                   2.0) < 1e-9);
  }
  SUBCASE("re-measured SNR at the evaluation levels") {
    Rng rng(17);
    const Waveform speech = synth_utterance("ami tumi kal", default_voice_profile(), rng);
    for (NoiseKind kind : {NoiseKind::White, NoiseKind::BabbleSurrogate, NoiseKind::Hum,
                           NoiseKind::FactorySurrogate}) {
      const Waveform noise = synth_noise({kind, 5, 2.0});
      for (double s : {0.0, 5.0, 10.0, 20.0}) {
        const MixResult r = mix_at_snr_detailed(speech, noise, s, rng);
        CHECK(r.mixed.size() == speech.size());
        CHECK(std::abs(snr_db(speech, r.scaled_noise) - s) <= 0.01);
        for (std::size_t i = 0; i < speech.size(); i += 97) {
          CHECK(r.mixed.samples[i] == speech.samples[i] + r.scaled_noise.samples[i]);
        }
      }
    }
  }
  SUBCASE("exactness property over random pairs and targets") {
    Rng rng(23);
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const Waveform speech = random_wave(rng, 500 + rng.uniform_int(3000), rng.uniform(0.01, 1.0));
      const Waveform noise = random_wave(rng, 200 + rng.uniform_int(6000), rng.uniform(0.01, 1.0));
      const double target = rng.uniform(-10.0, 40.0);
      const MixResult r = mix_at_snr_detailed(speech, noise, target, rng);
      worst = std::max(worst, std::abs(snr_db(speech, r.scaled_noise) - target));
    }
    CHECK(worst <= 0.01);
  }
  SUBCASE("short noise is looped, long noise is cropped") {
    Rng rng(3);
    Waveform speech = random_wave(rng, 1000, 0.5);
    Waveform noise;
    noise.samples = {0.5f, -0.25f, 0.125f};
    const MixResult r = mix_at_snr_detailed(speech, noise, 3.0, rng);
    for (std::size_t i = 0; i < speech.size(); ++i) {
      const float want = static_cast<float>(r.gain * noise.samples[(r.offset + i) % 3]);
      CHECK(r.scaled_noise.samples[i] == want);
    }
    Waveform long_noise = random_wave(rng, 5000, 0.3);
    const MixResult c = mix_at_snr_detailed(speech, long_noise, 3.0, rng);
    CHECK(c.offset + speech.size() <= long_noise.size());
  }
  SUBCASE("silent inputs") {
    Rng rng(1);
    Waveform silent;
    silent.samples.assign(100, 0.0f);
    Waveform loud = random_wave(rng, 100, 0.5);
    CHECK(code_of([&] { mix_at_snr(silent, loud, 5.0, rng); }) == ErrorCode::SilentSpeech);
    CHECK(code_of([&] { mix_at_snr(loud, silent, 5.0, rng); }) == ErrorCode::SilentNoise);
  }
  SUBCASE("same seed same mix") {
    Rng a(9), b(9);
    const Waveform speech = sine(300, 0.4, 4000);
    const Waveform noise = synth_noise({NoiseKind::White, 1, 1.0});
    CHECK(mix_at_snr(speech, noise, 5, a).samples == mix_at_snr(speech, noise, 5, b).samples);
  }
}

TEST_CASE("noise synthesis") {
  for (NoiseKind kind : {NoiseKind::White, NoiseKind::BabbleSurrogate, NoiseKind::Hum,
                         NoiseKind::FactorySurrogate}) {
    const NoiseSpec spec{kind, 42, 1.5};
    const Waveform a = synth_noise(spec);
    const Waveform b = synth_noise(spec);
    CHECK(a.samples == b.samples);
    CHECK(a.size() == 24000);
    CHECK(signal_power(a) > 0.0);
    CHECK(synth_noise({kind, 43, 1.5}).samples != a.samples);
  }
  SUBCASE("white noise power matches the uniform variance") {
    const double expected = kWhiteNoiseAmplitude * kWhiteNoiseAmplitude / 3.0;
    const Waveform w = synth_noise({NoiseKind::White, 7, 1.0});
    CHECK(std::abs(signal_power(w) - expected) / expected < 0.05);
  }
  SUBCASE("hum energy sits at the mains harmonics") {
    const Waveform h = synth_noise({NoiseKind::Hum, 7, 1.0});
    // 1 Hz bins over one second. Parseval: sum_k |X_k|^2 = N sum x^2, and a
    // real signal splits each line between bins k and N-k.
    const double total = static_cast<double>(h.size()) * signal_power(h) * static_cast<double>(h.size());
    double in_band = 0;
    for (std::size_t f : {50u, 100u, 150u, 200u}) {
      for (std::size_t k = f - 2; k <= f + 2; ++k) in_band += 2.0 * dft_energy(h.samples, k);
    }
    CHECK(in_band / total >= 0.9);
  }
  CHECK_THROWS_AS(synth_noise({NoiseKind::White, 1, 0.0}), Error);
  CHECK(parse_noise_kind("factory_surrogate") == NoiseKind::FactorySurrogate);
  CHECK_THROWS_AS(parse_noise_kind("vehicle"), Error);
}

TEST_CASE("toy utterance synthesis") {
  const VoiceProfile profile = default_voice_profile();
  Rng rng(5);
  SUBCASE("empty text is one gap of silence") {
    const Waveform w = synth_utterance("", profile, rng);
    CHECK(w.size() == gap_samples(profile));
    CHECK(signal_power(w) == 0.0);
  }
  SUBCASE("single character lasts char_duration") {
    CHECK(synth_utterance("a", profile, rng).size() == char_samples(profile));
    CHECK(char_samples(profile) == 1280);
  }
  SUBCASE("words are separated by gaps") {
    const Waveform w = synth_utterance("ab da", profile, rng);
    CHECK(w.size() == 4 * char_samples(profile) + gap_samples(profile));
    for (std::size_t i = 0; i < gap_samples(profile); ++i) {
      CHECK(w.samples[2 * char_samples(profile) + i] == 0.0f);
    }
  }
  SUBCASE("spectral peaks at the scaled formants") {
    VoiceProfile p = profile;
    p.formant_table = {{U'a', {400.0, 900.0}}};
    p.char_duration = 100.0;  // 1600 samples, 10 Hz bins
    for (double accent : {1.0, 1.12, 0.9}) {
      p.accent_factor = accent;
      const Waveform w = synth_utterance("a", p, rng);
      const double bin = 10.0;
      const double f1 = 400.0 * accent, f2 = 900.0 * accent;
      const auto k1 = static_cast<double>(dft_peak(w.samples, 20, 60));
      const auto k2 = static_cast<double>(dft_peak(w.samples, 70, 110));
      // One bin of resolution plus the 1% seeded jitter.
      CHECK(std::abs(k1 * bin - f1) <= bin + 0.01 * f1);
      CHECK(std::abs(k2 * bin - f2) <= bin + 0.01 * f2);
      // f1 carries more energy than f2, which beats anything else.
      CHECK(dft_energy(w.samples, static_cast<std::size_t>(k1)) >
            dft_energy(w.samples, static_cast<std::size_t>(k2)));
    }
  }
  SUBCASE("accent changes frequency content only") {
    VoiceProfile shifted = profile;
    shifted.accent_factor = 1.12;
    Rng a(1), b(1);
    const Waveform x = synth_utterance("kobe mati", profile, a);
    const Waveform y = synth_utterance("kobe mati", shifted, b);
    CHECK(x.size() == y.size());
    CHECK(x.samples != y.samples);
  }
  SUBCASE("deterministic per seed") {
    Rng a(77), b(77);
    CHECK(synth_utterance("nodi", profile, a).samples == synth_utterance("nodi", profile, b).samples);
  }
  SUBCASE("unknown character") {
    CHECK(code_of([&] { synth_utterance("xyz", profile, rng); }) == ErrorCode::UnknownCharacter);
  }
  SUBCASE("profile validation") {
    VoiceProfile bad = profile;
    bad.accent_factor = 3.0;
    CHECK(code_of([&] { synth_utterance("a", bad, rng); }) == ErrorCode::InvalidConfig);
    bad = profile;
    bad.char_duration = 0;
    CHECK(code_of([&] { synth_utterance("a", bad, rng); }) == ErrorCode::InvalidConfig);
  }
}
