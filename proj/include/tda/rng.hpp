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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace tda {

// SplitMix64 generator. The output stream depends only on the seed, so runs
// are reproducible across platforms (floating-point draws use the top 53 bits
// and only IEEE-exact arithmetic, except normal() which goes through libm).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_int(std::size_t n);

  // Standard normal via Box-Muller.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates shuffle of an index vector.
  void shuffle(std::vector<std::size_t>& items);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// 64-bit FNV-1a of a byte string.
std::uint64_t hash_string(std::string_view text);

// Finalizer used to spread combined seeds.
std::uint64_t mix64(std::uint64_t x);

// Seed derivation: seed xor purpose-tag hash xor item hash, then mixed. Each
// sub-experiment gets an independent stream keyed by what it is for.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::string_view item = {});

}  // namespace tda
