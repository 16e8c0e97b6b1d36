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
#include <cstring>
#include <fstream>
#include <iterator>

#include "tda/audio.hpp"
#include "tda/error.hpp"

namespace tda {

namespace {

constexpr std::uint16_t kFormatPcm = 1;

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform parse_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw Error(ErrorCode::MalformedWav, "missing RIFF/WAVE header");
  }
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::size_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      throw Error(ErrorCode::MalformedWav, "chunk '" + std::string(id) + "' runs past end of file");
    }
    if (id == "fmt ") {
      if (size < 16) throw Error(ErrorCode::MalformedWav, "fmt chunk too small");
      const std::uint16_t format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format != kFormatPcm) {
        throw Error(ErrorCode::UnsupportedFormat, "format tag " + std::to_string(format));
      }
      if (channels != 1) {
        throw Error(ErrorCode::UnsupportedFormat, std::to_string(channels) + " channels");
      }
      if (bits != 16) throw Error(ErrorCode::UnsupportedFormat, std::to_string(bits) + "-bit");
      if (rate == 0) throw Error(ErrorCode::MalformedWav, "zero sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(ErrorCode::MalformedWav, "data chunk before fmt chunk");
      if (size % 2 != 0 || size == 0) {
        throw Error(ErrorCode::MalformedWav, "data chunk holds no whole 16-bit samples");
      }
      Waveform wave;
      wave.sample_rate = static_cast<int>(rate);
      wave.samples.resize(size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
        wave.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
  throw Error(ErrorCode::MalformedWav, have_fmt ? "no data chunk" : "no fmt chunk");
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

std::string encode_wav(const Waveform& wave) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float v : wave.samples) {
    const double scaled = std::round(std::clamp(static_cast<double>(v), -1.0, 1.0) * 32768.0);
    const auto s = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(s));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const std::string bytes = encode_wav(wave);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace tda
