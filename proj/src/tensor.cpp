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

#include "tda/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "tda/error.hpp"

namespace tda {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape, std::size_t data_size) {
  if (shape.empty()) throw Error(ErrorCode::ShapeMismatch, "tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) throw Error(ErrorCode::ShapeMismatch, "zero-sized dimension in " + shape_str(shape));
  }
  if (numel(shape) != data_size) {
    throw Error(ErrorCode::ShapeMismatch, "shape " + shape_str(shape) + " does not hold " +
                                              std::to_string(data_size) + " values");
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  check_shape(shape, data.size());
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Shape shape, std::vector<T> data, const std::vector<Tensor>& parents,
                             BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data));
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (any) {
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (const Tensor& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward_fn = std::move(backward);
  }
  return out;
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (size() != 1) {
    throw Error(ErrorCode::NonScalarLoss, "backward() needs a scalar, got " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS yields a topological order (parents first).
  using NodePtr = detail::Node<T>*;
  std::vector<NodePtr> order;
  std::unordered_set<NodePtr> visited;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodePtr node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace tda
