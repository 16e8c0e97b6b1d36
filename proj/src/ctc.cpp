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

#include "tda/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tda/error.hpp"

namespace tda {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRowTolerance = 1e-4;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

void check_rows(const LogProbView& lp) {
  if (lp.frames == 0 || lp.classes == 0 || lp.data.size() != lp.frames * lp.classes) {
    throw Error(ErrorCode::ShapeMismatch, "log-prob table must be non-empty [frames x classes]");
  }
  for (std::size_t t = 0; t < lp.frames; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < lp.classes; ++k) s += std::exp(lp.at(t, k));
    if (!(std::abs(s - 1.0) <= kRowTolerance)) {
      throw Error(ErrorCode::UnnormalizedRow,
                  "frame " + std::to_string(t) + " sums to " + std::to_string(s));
    }
  }
}

void check_target(std::span<const int> target, std::size_t classes) {
  for (int y : target) {
    if (y <= kBlank || static_cast<std::size_t>(y) >= classes) {
      throw Error(ErrorCode::InvalidTarget, "label " + std::to_string(y) + " not in [1, " +
                                                std::to_string(classes - 1) + "]");
    }
  }
}

std::vector<double> to_double(std::span<const float> x) { return {x.begin(), x.end()}; }
std::vector<double> to_double(std::span<const double> x) { return {x.begin(), x.end()}; }

template <typename T>
LogProbView view_of(const Tensor<T>& log_probs, std::vector<double>& storage) {
  if (log_probs.rank() != 2) {
    throw Error(ErrorCode::ShapeMismatch, "log-probs must be [frames x classes], got " +
                                              shape_str(log_probs.shape()));
  }
  storage = to_double(log_probs.data());
  return {storage, log_probs.dim(0), log_probs.dim(1)};
}

}  // namespace

std::vector<int> collapse(std::span<const int> path) {
  std::vector<int> out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && path[i] == path[i - 1]) continue;
    if (path[i] != kBlank) out.push_back(path[i]);
  }
  return out;
}

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1];
  return n;
}

CtcResult ctc_loss(const LogProbView& lp, std::span<const int> target, bool keep_tables) {
  check_rows(lp);
  check_target(target, lp.classes);
  const std::size_t T = lp.frames;
  const std::size_t S = 2 * target.size() + 1;

  CtcResult result;
  result.lattice = S;
  if (T < ctc_min_frames(target)) {
    result.loss = std::numeric_limits<double>::infinity();
    result.feasible = false;
    return result;
  }

  std::vector<int> label(S, kBlank);
  for (std::size_t u = 0; u < target.size(); ++u) label[2 * u + 1] = target[u];
  // Skipping over the blank at s-1 into s is allowed only between distinct labels.
  auto can_skip = [&](std::size_t s) { return s >= 2 && label[s] != kBlank && label[s] != label[s - 2]; };

  std::vector<double> alpha(T * S, kNegInf), beta(T * S, kNegInf);
  alpha[0] = lp.at(0, kBlank);
  if (S > 1) alpha[1] = lp.at(0, static_cast<std::size_t>(label[1]));
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &alpha[(t - 1) * S];
    double* cur = &alpha[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = log_add(acc, prev[s - 1]);
      if (can_skip(s)) acc = log_add(acc, prev[s - 2]);
      cur[s] = acc == kNegInf ? kNegInf : acc + lp.at(t, static_cast<std::size_t>(label[s]));
    }
  }

  double* last = &beta[(T - 1) * S];
  last[S - 1] = 0.0;
  if (S > 1) last[S - 2] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* next = &beta[(t + 1) * S];
    double* cur = &beta[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      auto step = [&](std::size_t to) {
        return next[to] == kNegInf ? kNegInf : next[to] + lp.at(t + 1, static_cast<std::size_t>(label[to]));
      };
      double acc = step(s);
      if (s + 1 < S) acc = log_add(acc, step(s + 1));
      if (s + 2 < S && can_skip(s + 2)) acc = log_add(acc, step(s + 2));
      cur[s] = acc;
    }
  }

  double log_p = alpha[(T - 1) * S + S - 1];
  if (S > 1) log_p = log_add(log_p, alpha[(T - 1) * S + S - 2]);
  result.loss = -log_p;

  // d(-log P)/d lp_t(k) = -sum over lattice positions labelled k of the
  // posterior occupancy exp(alpha + beta - log P).
  result.grad.assign(T * lp.classes, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const double a = alpha[t * S + s], b = beta[t * S + s];
      if (a == kNegInf || b == kNegInf) continue;
      result.grad[t * lp.classes + static_cast<std::size_t>(label[s])] -= std::exp(a + b - log_p);
    }
  }
  if (keep_tables) {
    result.alpha = std::move(alpha);
    result.beta = std::move(beta);
  }
  return result;
}

template <typename T>
CtcResult ctc_loss(const Tensor<T>& log_probs, std::span<const int> target, bool keep_tables) {
  std::vector<double> storage;
  return ctc_loss(view_of(log_probs, storage), target, keep_tables);
}

template <typename T>
Tensor<T> ctc_loss_node(const Tensor<T>& log_probs, std::span<const int> target) {
  CtcResult r = ctc_loss(log_probs, target);
  const auto value = static_cast<T>(r.loss);
  if (!r.feasible) return Tensor<T>::scalar(value);
  auto grad = std::make_shared<std::vector<double>>(std::move(r.grad));
  return Tensor<T>::from_op({1}, {value}, {log_probs}, [grad](detail::Node<T>& out) {
    const double g = out.grad[0];
    auto dst = out.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<T>(g * (*grad)[i]);
  });
}

double brute_force_ctc(const LogProbView& lp, std::span<const int> target) {
  check_target(target, lp.classes);
  double count = 1.0;
  for (std::size_t t = 0; t < lp.frames; ++t) {
    count *= static_cast<double>(lp.classes);
    if (count > 1e6) throw Error(ErrorCode::TooLargeToEnumerate, "more than 1e6 paths");
  }
  const std::vector<int> want(target.begin(), target.end());
  std::vector<int> path(lp.frames, 0);
  double total = kNegInf;
  while (true) {
    if (collapse(path) == want) {
      double lpath = 0.0;
      for (std::size_t t = 0; t < lp.frames; ++t) lpath += lp.at(t, static_cast<std::size_t>(path[t]));
      total = log_add(total, lpath);
    }
    // Odometer increment over classes^frames.
    std::size_t t = 0;
    while (t < lp.frames && ++path[t] == static_cast<int>(lp.classes)) path[t++] = 0;
    if (t == lp.frames) break;
  }
  return -total;
}

std::vector<int> best_path(const LogProbView& lp) {
  std::vector<int> path(lp.frames);
  for (std::size_t t = 0; t < lp.frames; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < lp.classes; ++k) {
      if (lp.at(t, k) > lp.at(t, best)) best = k;
    }
    path[t] = static_cast<int>(best);
  }
  return collapse(path);
}

template <typename T>
std::vector<int> best_path(const Tensor<T>& log_probs) {
  std::vector<double> storage;
  return best_path(view_of(log_probs, storage));
}

template <typename T>
std::string greedy_decode(const Tensor<T>& log_probs, const Vocabulary& vocab) {
  return vocab.decode(best_path(log_probs));
}

#define TDA_INSTANTIATE_CTC(T)                                                                  \
  template CtcResult ctc_loss<T>(const Tensor<T>&, std::span<const int>, bool);                 \
  template Tensor<T> ctc_loss_node<T>(const Tensor<T>&, std::span<const int>);                  \
  template std::vector<int> best_path<T>(const Tensor<T>&);                                     \
  template std::string greedy_decode<T>(const Tensor<T>&, const Vocabulary&);

TDA_INSTANTIATE_CTC(float)
TDA_INSTANTIATE_CTC(double)

}  // namespace tda
