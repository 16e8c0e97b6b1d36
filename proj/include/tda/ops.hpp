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
#include <span>
#include <vector>

#include "tda/tensor.hpp"

namespace tda {

// Matrix product of [m x k] and [k x n]. ShapeMismatch on inner dims.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// 2-D transpose.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

// Elementwise, identical shapes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// x[m x n] + bias[n] broadcast over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

// x·w + b, the dense layer used throughout the model.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Valid (unpadded) 1-D convolution. x: [C_in x L], w: [C_out x C_in x K],
// bias: [C_out]. Output [C_out x ((L - K) / stride + 1)]. InputTooShort if
// L < K.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride);

// Exact erf form: 0.5 x (1 + erf(x / sqrt 2)).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// Normalizes each last-axis vector, then gamma * xhat + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps);

// x: [C x L]. Statistics per group of C / groups channels over all time steps;
// affine per channel. BadGrouping when C % groups != 0.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps);

// Max-subtracted softmax / log-softmax over the last axis.
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x);
template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x);

// Columns [start, start + count) of a 2-D tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count);

// Horizontal concatenation of 2-D tensors with equal row counts.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

// x[index] along the leading axis of a rank >= 2 tensor.
template <typename T>
Tensor<T> select(const Tensor<T>& x, std::size_t index);

// Rows listed in `rows` are replaced by `row` ([n]); the rest pass through.
template <typename T>
Tensor<T> replace_rows(const Tensor<T>& x, std::span<const std::size_t> rows,
                       const Tensor<T>& row);

// Mean over the listed rows of -x[row][targets[row]]; with x holding
// log-probabilities this is the masked cross-entropy.
template <typename T>
Tensor<T> nll_rows(const Tensor<T>& x, std::span<const int> targets,
                   std::span<const std::size_t> rows);

}  // namespace tda
