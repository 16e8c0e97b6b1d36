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

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a shared graph node. Operations evaluate
// eagerly and, when any input requires a gradient, record a closure that maps
// the output gradient onto the inputs. backward() walks the recorded graph in
// reverse topological order, visiting each node once, and accumulates (sums)
// into every reachable gradient buffer. Leaf gradients are never cleared
// implicitly; call zero_grad() before each step.
//
// The scalar type is a template parameter. float and double are instantiated:
// float for training, double for the verification suites.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tda {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using value_type = T;
  // Receives the finished output node; reads node.grad, accumulates into the
  // parents captured by the closure.
  using BackwardFn = std::function<void(detail::Node<T>&)>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  // Builds the result of a differentiable operation. The backward closure is
  // only kept if at least one parent requires a gradient.
  static Tensor from_op(Shape shape, std::vector<T> data,
                        const std::vector<Tensor>& parents, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  // Direct write access, for leaves (parameters, inputs). Mutating a tensor
  // that is already part of a recorded graph invalidates that graph.
  std::span<T> mutable_data() { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  // Allocates (if needed) and zero-fills the gradient buffer.
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }

  T item() const;
  // Deep copy of the data with no graph history.
  Tensor detach() const;

  // Reverse-mode sweep from this scalar. Throws NonScalarLoss otherwise.
  void backward() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node<T>> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace tda
