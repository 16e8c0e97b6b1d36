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
#include <limits>

#include "doctest.h"
#include "tda/ctc.hpp"
#include "tda/error.hpp"
#include "tda/gradcheck.hpp"

using namespace tda;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Table {
  std::vector<double> data;
  std::size_t frames, classes;
  LogProbView view() const { return {data, frames, classes}; }
};

Table random_table(Rng& rng, std::size_t frames, std::size_t classes) {
  Table t{std::vector<double>(frames * classes), frames, classes};
  for (std::size_t f = 0; f < frames; ++f) {
    double mx = -kInf;
    for (std::size_t k = 0; k < classes; ++k) {
      t.data[f * classes + k] = 2.0 * rng.normal();
      mx = std::max(mx, t.data[f * classes + k]);
    }
    double s = 0;
    for (std::size_t k = 0; k < classes; ++k) s += std::exp(t.data[f * classes + k] - mx);
    for (std::size_t k = 0; k < classes; ++k) t.data[f * classes + k] -= mx + std::log(s);
  }
  return t;
}

Table uniform_table(std::size_t frames, std::size_t classes) {
  return {std::vector<double>(frames * classes, -std::log(static_cast<double>(classes))), frames,
          classes};
}

Table one_hot(const std::vector<int>& path, std::size_t classes) {
  Table t{std::vector<double>(path.size() * classes, -kInf), path.size(), classes};
  for (std::size_t f = 0; f < path.size(); ++f) t.data[f * classes + static_cast<std::size_t>(path[f])] = 0.0;
  return t;
}

std::vector<int> random_target(Rng& rng, std::size_t max_len, std::size_t classes) {
  std::vector<int> y(rng.uniform_int(max_len + 1));
  for (int& v : y) v = 1 + static_cast<int>(rng.uniform_int(classes - 1));
  return y;
}

// Independent oracle: probability-space sum over all paths, with its own
// collapse written as "keep a symbol if it differs from its predecessor and
// is not blank".
double enumerate_probability(const Table& t, const std::vector<int>& target) {
  std::size_t total = 1;
  for (std::size_t f = 0; f < t.frames; ++f) total *= t.classes;
  double p = 0.0;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    std::vector<int> path(t.frames);
    for (std::size_t f = 0; f < t.frames; ++f) {
      path[f] = static_cast<int>(c % t.classes);
      c /= t.classes;
    }
    std::vector<int> out;
    int prev = -1;
    for (int s : path) {
      if (s != prev && s != 0) out.push_back(s);
      prev = s;
    }
    if (out != target) continue;
    double q = 1.0;
    for (std::size_t f = 0; f < t.frames; ++f) q *= std::exp(t.data[f * t.classes + static_cast<std::size_t>(path[f])]);
    p += q;
  }
  return p;
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == -kInf) return mx;
  double s = 0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

TEST_CASE("collapse") {
  // h=1 e=2 l=3 o=4
  const std::vector<int> path = {1, 1, 0, 2, 3, 3, 0, 3, 4};
  CHECK(collapse(path) == std::vector<int>{1, 2, 3, 3, 4});
  CHECK(collapse(std::vector<int>{0, 0, 0}).empty());
  CHECK(collapse(std::vector<int>{1, 0, 1}) == std::vector<int>{1, 1});
  CHECK(collapse(std::vector<int>{1, 1}) == std::vector<int>{1});
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    std::vector<int> p(rng.uniform_int(12));
    for (int& v : p) v = static_cast<int>(rng.uniform_int(4));
    const auto once = collapse(p);
    // Blank-separated repeats survive one pass and merge on a second, so
    // idempotence holds exactly when the output has no adjacent repeats.
    const bool repeats = std::adjacent_find(once.begin(), once.end()) != once.end();
    CHECK((collapse(once) == once) == !repeats);
  }
}

TEST_CASE("worked uniform T=2 example") {
  const Table t = uniform_table(2, 2);
  // Paths (a,a), (a,e), (e,a) collapse to "a": 3 x 0.25.
  CHECK(std::abs(ctc_loss(t.view(), std::vector<int>{1}).loss - (-std::log(0.75))) < 1e-12);
  CHECK(std::abs(ctc_loss(t.view(), std::vector<int>{1}).loss - 0.287682) < 1e-6);
  CHECK(std::abs(ctc_loss(t.view(), std::vector<int>{}).loss - (-std::log(0.25))) < 1e-12);
  CHECK(std::abs(brute_force_ctc(t.view(), std::vector<int>{1}) - (-std::log(0.75))) < 1e-9);
  const CtcResult r = ctc_loss(t.view(), std::vector<int>{1, 1});
  CHECK_FALSE(r.feasible);
  CHECK(r.loss == kInf);
  CHECK(r.grad.empty());
  CHECK(ctc_min_frames(std::vector<int>{1, 1}) == 3);
  CHECK(ctc_min_frames(std::vector<int>{1, 2, 2, 2}) == 6);
}

TEST_CASE("single-path degenerate case") {
  const Table t = one_hot({1, 1, 0, 2}, 3);
  CHECK(ctc_loss(t.view(), std::vector<int>{1, 2}).loss == 0.0);
  CHECK(brute_force_ctc(t.view(), std::vector<int>{1, 2}) == 0.0);
  CHECK(ctc_loss(t.view(), std::vector<int>{2, 1}).loss == kInf);
}

TEST_CASE("oracle equivalence") {
  Rng rng(2024);
  double worst = 0.0, worst_prob = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t frames = 1 + rng.uniform_int(6);
    const std::size_t classes = 2 + rng.uniform_int(4);
    const Table t = random_table(rng, frames, classes);
    const auto y = random_target(rng, 3, classes);
    const double dp = ctc_loss(t.view(), y).loss;
    const double bf = brute_force_ctc(t.view(), y);
    if (std::isinf(dp) || std::isinf(bf)) {
      CHECK(dp == bf);
      CHECK(enumerate_probability(t, y) == 0.0);
      continue;
    }
    worst = std::max(worst, std::abs(dp - bf));
    worst_prob = std::max(worst_prob, std::abs(std::exp(-dp) - enumerate_probability(t, y)));
  }
  CHECK(worst <= 1e-9);
  CHECK(worst_prob <= 1e-12);
}

TEST_CASE("analytic gradient") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Table t = random_table(rng, 5, 4);
    const auto y = random_target(rng, 2, 4);
    Tensor<double> lp({5, 4}, t.data, true);
    // Small step: perturbed rows must stay within the 1e-4 normalization check.
    const double err = finite_diff_check<double>(
        [&](const Tensor<double>& x) { return ctc_loss_node(x, y); }, lp, 1e-5);
    CHECK(err <= 1e-5);
  }
  SUBCASE("rows of the gradient sum to minus one") {
    const Table t = random_table(rng, 6, 3);
    const CtcResult r = ctc_loss(t.view(), std::vector<int>{1, 2});
    for (std::size_t f = 0; f < 6; ++f) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += r.grad[f * 3 + k];
      CHECK(std::abs(s + 1.0) < 1e-12);
    }
  }
  SUBCASE("infeasible targets record no gradient") {
    Tensor<double> lp({2, 2}, uniform_table(2, 2).data, true);
    Tensor<double> loss = ctc_loss_node(lp, std::vector<int>{1, 1});
    CHECK(std::isinf(loss.item()));
    CHECK_FALSE(loss.requires_grad());
  }
}

TEST_CASE("forward-backward identity") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t frames = 3 + rng.uniform_int(20);
    const Table t = random_table(rng, frames, 5);
    const auto y = random_target(rng, 4, 5);
    const CtcResult r = ctc_loss(t.view(), y, true);
    if (!r.feasible) continue;
    for (std::size_t f = 0; f < frames; ++f) {
      std::vector<double> terms(r.lattice);
      for (std::size_t s = 0; s < r.lattice; ++s) terms[s] = r.alpha[f * r.lattice + s] + r.beta[f * r.lattice + s];
      CHECK(std::abs(log_sum_exp(terms) + r.loss) <= 1e-8);
    }
  }
}

TEST_CASE("appending a frame keeps a target feasible") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 1 + rng.uniform_int(5);
    const Table t = random_table(rng, frames, 3);
    const auto y = random_target(rng, 3, 3);
    if (!ctc_loss(t.view(), y).feasible) continue;
    const Table extra = random_table(rng, 1, 3);
    Table longer = t;
    longer.frames += 1;
    longer.data.insert(longer.data.end(), extra.data.begin(), extra.data.end());
    CHECK(ctc_loss(longer.view(), y).feasible);
  }
}

TEST_CASE("input validation") {
  Table t = uniform_table(3, 3);
  t.data[4] += 0.01;
  CHECK_THROWS_WITH_AS(ctc_loss(t.view(), std::vector<int>{1}), doctest::Contains("UnnormalizedRow"), Error);
  const Table u = uniform_table(3, 3);
  CHECK_THROWS_AS(ctc_loss(u.view(), std::vector<int>{0}), Error);
  CHECK_THROWS_AS(ctc_loss(u.view(), std::vector<int>{3}), Error);
  const Table big = uniform_table(9, 5);
  CHECK_THROWS_WITH_AS(brute_force_ctc(big.view(), std::vector<int>{1}),
                       doctest::Contains("TooLargeToEnumerate"), Error);
}

TEST_CASE("greedy decoding") {
  const Vocabulary vocab(std::u32string{U'\0', U'a', U'b'});
  Tensor<double> rows({4, 3}, one_hot({1, 1, 0, 2}, 3).data);
  CHECK(greedy_decode(rows, vocab) == "ab");
  Tensor<double> blanks({3, 3}, one_hot({0, 0, 0}, 3).data);
  CHECK(greedy_decode(blanks, vocab).empty());
  Tensor<double> tie({1, 3}, {std::log(0.4), std::log(0.4), std::log(0.2)});
  CHECK(best_path(tie).empty());
  Tensor<float> tie_ab({1, 3}, {std::log(0.2f), std::log(0.4f), std::log(0.4f)});
  CHECK(greedy_decode(tie_ab, vocab) == "a");
}
