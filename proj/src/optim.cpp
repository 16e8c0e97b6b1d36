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

#include "tda/optim.hpp"

#include <cmath>

#include "tda/error.hpp"

namespace tda {

template <typename T>
void AdamW<T>::step(ModelParams<T>& params, double lr) {
  for (const auto& [name, p] : params.tensors) {
    for (T g : p.grad()) {
      if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "gradient of " + name);
    }
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& [name, p] : params.tensors) {
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    const auto g = p.grad();
    auto theta = p.mutable_data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      const double th = static_cast<double>(theta[i]);
      theta[i] = static_cast<T>(th - lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * th));
    }
  }
}

double lr_schedule(std::size_t step, std::size_t total_steps, double peak, double warmup_frac) {
  const auto warm = static_cast<std::size_t>(std::llround(warmup_frac * static_cast<double>(total_steps)));
  if (step < warm) return peak * (static_cast<double>(step + 1) / static_cast<double>(warm));
  if (step >= total_steps) return 0.0;
  return peak * (static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warm));
}

template <typename T>
double grad_norm(const ModelParams<T>& params) {
  double acc = 0.0;
  for (const auto& [name, p] : params.tensors) {
    for (T g : p.grad()) acc += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(acc);
}

template <typename T>
double clip_grad_norm(ModelParams<T>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) scale_grads(params, max_norm / norm);
  return norm;
}

template <typename T>
void scale_grads(ModelParams<T>& params, double factor) {
  for (auto& [name, p] : params.tensors) {
    if (!p.has_grad()) continue;
    for (T& g : p.mutable_grad()) g = static_cast<T>(g * factor);
  }
}

template class AdamW<float>;
template class AdamW<double>;
template double grad_norm<float>(const ModelParams<float>&);
template double grad_norm<double>(const ModelParams<double>&);
template double clip_grad_norm<float>(ModelParams<float>&, double);
template double clip_grad_norm<double>(ModelParams<double>&, double);
template void scale_grads<float>(ModelParams<float>&, double);
template void scale_grads<double>(ModelParams<double>&, double);

}  // namespace tda
