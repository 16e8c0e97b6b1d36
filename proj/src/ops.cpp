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

#include "tda/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tda/error.hpp"

namespace tda {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

template <typename T>
void require_rank(const Tensor<T>& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected rank " +
                                              std::to_string(rank) + ", got " +
                                              shape_str(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
bool wants_grad(const NodePtr<T>& n) {
  return n->requires_grad;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw Error(ErrorCode::ShapeMismatch,
                "matmul inner dimensions " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  MutMap<T>(out.data(), m, n).noalias() =
      ConstMap<T>(a.data().data(), m, k) * ConstMap<T>(b.data().data(), k, n);
  auto pa = a.node();
  auto pb = b.node();
  return Tensor<T>::from_op({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](detail::Node<T>& o) {
    ConstMap<T> g(o.grad.data(), m, n);
    if (wants_grad(pa)) {
      MutMap<T>(pa->grad_buffer().data(), m, k).noalias() +=
          g * ConstMap<T>(pb->data.data(), k, n).transpose();
    }
    if (wants_grad(pb)) {
      MutMap<T>(pb->grad_buffer().data(), k, n).noalias() +=
          ConstMap<T>(pa->data.data(), m, k).transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(r * c);
  MutMap<T>(out.data(), c, r) = ConstMap<T>(x.data().data(), r, c).transpose();
  auto px = x.node();
  return Tensor<T>::from_op({c, r}, std::move(out), {x}, [px, r, c](detail::Node<T>& o) {
    MutMap<T>(px->grad_buffer().data(), r, c) += ConstMap<T>(o.grad.data(), c, r).transpose();
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto pa = a.node();
  auto pb = b.node();
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [pa, pb](detail::Node<T>& o) {
    for (const auto& p : {pa, pb}) {
      if (!wants_grad(p)) continue;
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto pa = a.node();
  auto pb = b.node();
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [pa, pb](detail::Node<T>& o) {
    if (wants_grad(pa)) {
      auto g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (wants_grad(pb)) {
      auto g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  auto pa = a.node();
  auto pb = b.node();
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [pa, pb](detail::Node<T>& o) {
    if (wants_grad(pa)) {
      auto g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pb->data[i];
    }
    if (wants_grad(pb)) {
      auto g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pa->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v *= factor;
  auto px = x.node();
  return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [px, factor](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * o.grad[i];
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank(x, 2, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n) {
    throw Error(ErrorCode::ShapeMismatch,
                "add_bias: " + shape_str(x.shape()) + " + " + shape_str(bias.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  auto px = x.node();
  auto pb = bias.node();
  return Tensor<T>::from_op(x.shape(), std::move(out), {x, bias}, [px, pb, m, n](detail::Node<T>& o) {
    if (wants_grad(px)) {
      auto g = px->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (wants_grad(pb)) {
      auto g = pb->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add_bias(matmul(x, w), b);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  auto px = x.node();
  return Tensor<T>::from_op({1}, {total}, {x}, [px](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    for (T& v : g) v += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::size_t stride) {
  require_rank(x, 2, "conv1d input");
  require_rank(w, 3, "conv1d weight");
  if (stride == 0) throw Error(ErrorCode::ShapeMismatch, "conv1d: stride must be positive");
  const std::size_t c_in = x.dim(0), len = x.dim(1);
  const std::size_t c_out = w.dim(0), k = w.dim(2);
  if (w.dim(1) != c_in) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv1d: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  }
  if (bias.size() != c_out) {
    throw Error(ErrorCode::ShapeMismatch, "conv1d: bias " + shape_str(bias.shape()));
  }
  if (len < k) {
    throw Error(ErrorCode::InputTooShort, "conv1d: length " + std::to_string(len) +
                                              " shorter than kernel " + std::to_string(k));
  }
  const std::size_t out_len = (len - k) / stride + 1;
  const std::size_t rows = c_in * k;

  // im2col: cols[(ci*K + j), t] = x[ci, t*stride + j]
  auto cols = std::make_shared<std::vector<T>>(rows * out_len);
  const auto xd = x.data();
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    const T* src = xd.data() + ci * len;
    for (std::size_t j = 0; j < k; ++j) {
      T* dst = cols->data() + (ci * k + j) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) dst[t] = src[t * stride + j];
    }
  }

  std::vector<T> out(c_out * out_len);
  MutMap<T> om(out.data(), c_out, out_len);
  om.noalias() = ConstMap<T>(w.data().data(), c_out, rows) * ConstMap<T>(cols->data(), rows, out_len);
  const auto bd = bias.data();
  for (std::size_t co = 0; co < c_out; ++co) om.row(co).array() += bd[co];

  auto px = x.node();
  auto pw = w.node();
  auto pb = bias.node();
  return Tensor<T>::from_op(
      {c_out, out_len}, std::move(out), {x, w, bias},
      [px, pw, pb, cols, c_in, len, c_out, k, stride, out_len, rows](detail::Node<T>& o) {
        ConstMap<T> g(o.grad.data(), c_out, out_len);
        if (wants_grad(pw)) {
          MutMap<T>(pw->grad_buffer().data(), c_out, rows).noalias() +=
              g * ConstMap<T>(cols->data(), rows, out_len).transpose();
        }
        if (wants_grad(pb)) {
          auto gb = pb->grad_buffer();
          // Plain loop: Eigen's reduction order depends on buffer alignment.
          for (std::size_t co = 0; co < c_out; ++co) {
            T acc = 0;
            for (std::size_t t = 0; t < out_len; ++t) acc += o.grad[co * out_len + t];
            gb[co] += acc;
          }
        }
        if (wants_grad(px)) {
          RowMat<T> dcols = ConstMap<T>(pw->data.data(), c_out, rows).transpose() * g;
          auto gx = px->grad_buffer();
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            T* dst = gx.data() + ci * len;
            for (std::size_t j = 0; j < k; ++j) {
              const T* src = dcols.data() + (ci * k + j) * out_len;
              for (std::size_t t = 0; t < out_len; ++t) dst[t * stride + j] += src[t];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  std::vector<T> out(x.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = T(0.5) * xd[i] * (T(1) + std::erf(xd[i] * inv_sqrt2));
  }
  auto px = x.node();
  return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [px, inv_sqrt2](detail::Node<T>& o) {
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    auto g = px->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = px->data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      g[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-xd[i]));
  auto px = x.node();
  return Tensor<T>::from_op(x.shape(), out, {x}, [px, out](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * out[i] * (T(1) - out[i]);
  });
}

namespace {

// Saved for the backward pass of the normalization ops.
template <typename T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> rstd;
};

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  if (gamma.size() != n || beta.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "layer_norm: affine size vs " + shape_str(x.shape()));
  }
  auto cache = std::make_shared<NormCache<T>>();
  cache->xhat.resize(x.size());
  cache->rstd.resize(rows);
  std::vector<T> out(x.size());
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xd.data() + r * n;
    T mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(n);
    const T rstd = T(1) / std::sqrt(var + eps);
    cache->rstd[r] = rstd;
    for (std::size_t j = 0; j < n; ++j) {
      const T h = (row[j] - mu) * rstd;
      cache->xhat[r * n + j] = h;
      out[r * n + j] = gd[j] * h + bd[j];
    }
  }
  auto px = x.node();
  auto pg = gamma.node();
  auto pb = beta.node();
  return Tensor<T>::from_op(x.shape(), std::move(out), {x, gamma, beta},
                            [px, pg, pb, cache, rows, n](detail::Node<T>& o) {
    const auto& xhat = cache->xhat;
    if (wants_grad(pg)) {
      auto g = pg->grad_buffer();
      for (std::size_t i = 0; i < rows * n; ++i) g[i % n] += o.grad[i] * xhat[i];
    }
    if (wants_grad(pb)) {
      auto g = pb->grad_buffer();
      for (std::size_t i = 0; i < rows * n; ++i) g[i % n] += o.grad[i];
    }
    if (wants_grad(px)) {
      auto g = px->grad_buffer();
      std::vector<T> dh(n);
      for (std::size_t r = 0; r < rows; ++r) {
        T mean_dh = 0, mean_dh_h = 0;
        for (std::size_t j = 0; j < n; ++j) {
          dh[j] = o.grad[r * n + j] * pg->data[j];
          mean_dh += dh[j];
          mean_dh_h += dh[j] * xhat[r * n + j];
        }
        mean_dh /= static_cast<T>(n);
        mean_dh_h /= static_cast<T>(n);
        for (std::size_t j = 0; j < n; ++j) {
          g[r * n + j] += cache->rstd[r] * (dh[j] - mean_dh - xhat[r * n + j] * mean_dh_h);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  require_rank(x, 2, "group_norm");
  const std::size_t channels = x.dim(0), len = x.dim(1);
  if (groups == 0 || channels % groups != 0) {
    throw Error(ErrorCode::BadGrouping, std::to_string(channels) + " channels into " +
                                            std::to_string(groups) + " groups");
  }
  if (gamma.size() != channels || beta.size() != channels) {
    throw Error(ErrorCode::ShapeMismatch, "group_norm: affine size vs " + shape_str(x.shape()));
  }
  const std::size_t seg = (channels / groups) * len;
  auto cache = std::make_shared<NormCache<T>>();
  cache->xhat.resize(x.size());
  cache->rstd.resize(groups);
  std::vector<T> out(x.size());
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const T* part = xd.data() + gi * seg;
    T mu = 0;
    for (std::size_t j = 0; j < seg; ++j) mu += part[j];
    mu /= static_cast<T>(seg);
    T var = 0;
    for (std::size_t j = 0; j < seg; ++j) var += (part[j] - mu) * (part[j] - mu);
    var /= static_cast<T>(seg);
    const T rstd = T(1) / std::sqrt(var + eps);
    cache->rstd[gi] = rstd;
    for (std::size_t j = 0; j < seg; ++j) {
      const std::size_t idx = gi * seg + j;
      const std::size_t ch = idx / len;
      const T h = (part[j] - mu) * rstd;
      cache->xhat[idx] = h;
      out[idx] = gd[ch] * h + bd[ch];
    }
  }
  auto px = x.node();
  auto pg = gamma.node();
  auto pb = beta.node();
  return Tensor<T>::from_op(x.shape(), std::move(out), {x, gamma, beta},
                            [px, pg, pb, cache, groups, seg, len](detail::Node<T>& o) {
    const auto& xhat = cache->xhat;
    const std::size_t total = groups * seg;
    if (wants_grad(pg)) {
      auto g = pg->grad_buffer();
      for (std::size_t i = 0; i < total; ++i) g[i / len] += o.grad[i] * xhat[i];
    }
    if (wants_grad(pb)) {
      auto g = pb->grad_buffer();
      for (std::size_t i = 0; i < total; ++i) g[i / len] += o.grad[i];
    }
    if (wants_grad(px)) {
      auto g = px->grad_buffer();
      std::vector<T> dh(seg);
      for (std::size_t gi = 0; gi < groups; ++gi) {
        T mean_dh = 0, mean_dh_h = 0;
        for (std::size_t j = 0; j < seg; ++j) {
          const std::size_t idx = gi * seg + j;
          dh[j] = o.grad[idx] * pg->data[idx / len];
          mean_dh += dh[j];
          mean_dh_h += dh[j] * xhat[idx];
        }
        mean_dh /= static_cast<T>(seg);
        mean_dh_h /= static_cast<T>(seg);
        for (std::size_t j = 0; j < seg; ++j) {
          const std::size_t idx = gi * seg + j;
          g[idx] += cache->rstd[gi] * (dh[j] - mean_dh - xhat[idx] * mean_dh_h);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  std::vector<T> out(x.size());
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xd.data() + r * n;
    T* y = out.data() + r * n;
    const T mx = *std::max_element(in, in + n);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) z += (y[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  auto px = x.node();
  auto probs = std::make_shared<std::vector<T>>(out);
  return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [px, probs, rows, n](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    const auto& y = *probs;
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += o.grad[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[r * n + j] * (o.grad[r * n + j] - dot);
    }
  });
}

template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  std::vector<T> out(x.size());
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xd.data() + r * n;
    const T mx = *std::max_element(in, in + n);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(in[j] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = in[j] - lse;
  }
  auto px = x.node();
  auto logp = std::make_shared<std::vector<T>>(out);
  return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [px, logp, rows, n](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      T total = 0;
      for (std::size_t j = 0; j < n; ++j) total += o.grad[r * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        g[r * n + j] += o.grad[r * n + j] - std::exp((*logp)[r * n + j]) * total;
      }
    }
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || start + count > cols) {
    throw Error(ErrorCode::ShapeMismatch, "slice_cols out of range for " + shape_str(x.shape()));
  }
  std::vector<T> out(rows * count);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xd.data() + r * cols + start, count, out.data() + r * count);
  }
  auto px = x.node();
  return Tensor<T>::from_op({rows, count}, std::move(out), {x},
                            [px, rows, cols, start, count](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) g[r * cols + start + j] += o.grad[r * count + j];
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const std::size_t rows = parts.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) throw Error(ErrorCode::ShapeMismatch, "concat_cols row mismatch");
    widths.push_back(p.dim(1));
    cols += p.dim(1);
  }
  std::vector<T> out(rows * cols);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto pd = parts[i].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pd.data() + r * widths[i], widths[i], out.data() + r * cols + offset);
    }
    offset += widths[i];
  }
  std::vector<NodePtr<T>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return Tensor<T>::from_op({rows, cols}, std::move(out), parts,
                            [nodes, widths, rows, cols](detail::Node<T>& o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (wants_grad(nodes[i])) {
        auto g = nodes[i]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[i]; ++j) g[r * widths[i] + j] += o.grad[r * cols + off + j];
      }
      off += widths[i];
    }
  });
}

template <typename T>
Tensor<T> select(const Tensor<T>& x, std::size_t index) {
  if (x.rank() < 2 || index >= x.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "select " + std::to_string(index) + " from " +
                                              shape_str(x.shape()));
  }
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = numel(shape);
  std::vector<T> out(x.data().begin() + index * n, x.data().begin() + (index + 1) * n);
  auto px = x.node();
  return Tensor<T>::from_op(std::move(shape), std::move(out), {x}, [px, index, n](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) g[index * n + i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> replace_rows(const Tensor<T>& x, std::span<const std::size_t> rows, const Tensor<T>& row) {
  require_rank(x, 2, "replace_rows");
  const std::size_t n_rows = x.dim(0), n = x.dim(1);
  if (row.size() != n) throw Error(ErrorCode::ShapeMismatch, "replace_rows: row width");
  std::vector<char> masked(n_rows, 0);
  for (std::size_t r : rows) {
    if (r >= n_rows) throw Error(ErrorCode::ShapeMismatch, "replace_rows: row index out of range");
    masked[r] = 1;
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto rd = row.data();
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (masked[r]) std::copy(rd.begin(), rd.end(), out.begin() + r * n);
  }
  auto px = x.node();
  auto pr = row.node();
  return Tensor<T>::from_op(x.shape(), std::move(out), {x, row},
                            [px, pr, masked, n_rows, n](detail::Node<T>& o) {
    if (wants_grad(px)) {
      auto g = px->grad_buffer();
      for (std::size_t r = 0; r < n_rows; ++r)
        if (!masked[r])
          for (std::size_t j = 0; j < n; ++j) g[r * n + j] += o.grad[r * n + j];
    }
    if (wants_grad(pr)) {
      auto g = pr->grad_buffer();
      for (std::size_t r = 0; r < n_rows; ++r)
        if (masked[r])
          for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[r * n + j];
    }
  });
}

template <typename T>
Tensor<T> nll_rows(const Tensor<T>& x, std::span<const int> targets,
                   std::span<const std::size_t> rows) {
  require_rank(x, 2, "nll_rows");
  const std::size_t n_rows = x.dim(0), n = x.dim(1);
  if (targets.size() != n_rows) throw Error(ErrorCode::ShapeMismatch, "nll_rows: targets length");
  if (rows.empty()) throw Error(ErrorCode::ShapeMismatch, "nll_rows: empty row set");
  std::vector<std::size_t> picks;
  picks.reserve(rows.size());
  T total = 0;
  const auto xd = x.data();
  for (std::size_t r : rows) {
    if (r >= n_rows || targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= n) {
      throw Error(ErrorCode::ShapeMismatch, "nll_rows: index out of range");
    }
    picks.push_back(r * n + static_cast<std::size_t>(targets[r]));
    total -= xd[picks.back()];
  }
  const T inv = T(1) / static_cast<T>(rows.size());
  auto px = x.node();
  return Tensor<T>::from_op({1}, {total * inv}, {x}, [px, picks, inv](detail::Node<T>& o) {
    auto g = px->grad_buffer();
    for (std::size_t idx : picks) g[idx] -= inv * o.grad[0];
  });
}

#define TDA_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> transpose(const Tensor<T>&);                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> mean(const Tensor<T>&);                                                    \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> gelu(const Tensor<T>&);                                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);       \
  template Tensor<T> group_norm(const Tensor<T>&, std::size_t, const Tensor<T>&,                \
                                const Tensor<T>&, T);                                           \
  template Tensor<T> softmax_lastdim(const Tensor<T>&);                                         \
  template Tensor<T> log_softmax_lastdim(const Tensor<T>&);                                     \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                    \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                \
  template Tensor<T> select(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> replace_rows(const Tensor<T>&, std::span<const std::size_t>,               \
                                  const Tensor<T>&);                                            \
  template Tensor<T> nll_rows(const Tensor<T>&, std::span<const int>,                           \
                              std::span<const std::size_t>);

TDA_INSTANTIATE_OPS(float)
TDA_INSTANTIATE_OPS(double)

#undef TDA_INSTANTIATE_OPS

}  // namespace tda
