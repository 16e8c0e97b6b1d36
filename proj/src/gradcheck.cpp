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

#include "tda/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tda {

template <typename T>
GradCheckResult finite_diff_report(const std::function<Tensor<T>()>& loss,
                                   std::vector<Tensor<T>> leaves, double h) {
  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<T>> analytic;
  for (const auto& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());

  // Plain evaluations need no graph.
  for (auto& leaf : leaves) leaf.set_requires_grad(false);

  GradCheckResult result;
  const T step = static_cast<T>(h);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto values = leaves[li].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      auto at = [&](T offset) {
        values[i] = saved + offset;
        return static_cast<double>(loss().item());
      };
      const double p1 = at(step), m1 = at(-step), p2 = at(2 * step), m2 = at(-2 * step);
      values[i] = saved;
      const double numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
      const double exact = static_cast<double>(analytic[li][i]);
      const double err = std::abs(exact - numeric) / std::max(std::abs(numeric), 1e-8);
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = err;
        result.worst_leaf = li;
        result.worst_index = i;
        result.analytic = exact;
        result.numeric = numeric;
      }
    }
  }
  for (auto& leaf : leaves) leaf.set_requires_grad(true);
  return result;
}

template <typename T>
double finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& x,
                         double h) {
  Tensor<T> leaf = x.detach();
  std::function<Tensor<T>()> loss = [&] { return f(leaf); };
  return finite_diff_report<T>(loss, {leaf}, h).max_rel_error;
}

template GradCheckResult finite_diff_report<float>(const std::function<Tensor<float>()>&,
                                                   std::vector<Tensor<float>>, double);
template GradCheckResult finite_diff_report<double>(const std::function<Tensor<double>()>&,
                                                    std::vector<Tensor<double>>, double);
template double finite_diff_check<float>(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                         const Tensor<float>&, double);
template double finite_diff_check<double>(
    const std::function<Tensor<double>(const Tensor<double>&)>&, const Tensor<double>&, double);

}  // namespace tda
