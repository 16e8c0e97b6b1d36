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
#include <functional>
#include <type_traits>
#include <vector>

#include "tda/tensor.hpp"

namespace tda {

template <typename T>
constexpr double default_fd_step() {
  return std::is_same_v<T, double> ? 1e-3 : 1e-2;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares backward() against the fourth-order central difference
// (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h for
// every coordinate of every leaf. `loss` must read the leaves' current data;
// the leaves are perturbed in place and restored. Per-coordinate error is
// |g_analytic - g_fd| / max(|g_fd|, 1e-8).
template <typename T>
GradCheckResult finite_diff_report(const std::function<Tensor<T>()>& loss,
                                   std::vector<Tensor<T>> leaves,
                                   double h = default_fd_step<T>());

// Single-input form: max relative error of the gradient of f at x.
template <typename T>
double finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                         double h = default_fd_step<T>());

}  // namespace tda
