#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "depcause/errors.hpp"

namespace depcause {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool backward_done = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

}  // namespace detail

// Whether newly created operations are recorded for differentiation.
inline bool grad_enabled() { return detail::grad_mode_flag(); }

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor with an optional accumulated gradient.
///
/// A Tensor is a cheap handle; copies share storage. Values are treated as
/// immutable once an operation has consumed them, except through the
/// explicit mutable accessors used by optimizers and initializers.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> values(shape_size(shape), T(0));
    return from(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor full(Shape shape, T fill, bool requires_grad = false) {
    std::vector<T> values(shape_size(shape), fill);
    return from(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_size(shape) != values.size()) {
      throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                           std::to_string(shape_size(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    if (requires_grad) node->ensure_grad();
    return Tensor(std::move(node));
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from(Shape{1}, std::vector<T>{v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const { return rank() == 2 ? node_->shape[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? node_->shape[1] : size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  T item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  T at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->value.size(), T(0));
  }

  // Detached copy with its own storage.
  Tensor clone(bool requires_grad = false) const {
    return from(shape(), node_->value, requires_grad);
  }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// Recorded operations reachable from a scalar loss, in topological order.
///
/// Backward visits every node once in reverse order. A second backward()
/// on the same loss without reset() throws.
template <typename T>
class Graph {
 public:
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  explicit Graph(const Tensor<T>& loss) : root_(loss.node()) {
    if (!root_) throw PreconditionError("backward on an undefined tensor");
    collect();
  }

  const std::vector<NodePtr>& order() const { return order_; }

  void backward() {
    if (root_->value.size() != 1) {
      throw DimensionError("backward requires a scalar loss, got shape " +
                           shape_str(root_->shape));
    }
    if (root_->backward_done) {
      throw PreconditionError("backward called twice on the same graph without reset()");
    }
    if (!root_->requires_grad) {
      root_->backward_done = true;
      return;
    }
    for (const auto& node : order_) {
      if (node->backward) node->grad.assign(node->value.size(), T(0));
    }
    root_->ensure_grad();
    root_->grad[0] += T(1);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      auto& node = **it;
      if (!node.backward) continue;
      for (auto& in : node.inputs) {
        if (in->requires_grad) in->ensure_grad();
      }
      node.backward(node);
    }
    root_->backward_done = true;
  }

  // Allows another backward() over the same recorded graph.
  void reset() { root_->backward_done = false; }

 private:
  void collect() {
    // Iterative post-order DFS.
    std::unordered_set<const detail::Node<T>*> seen;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root_, 0);
    seen.insert(root_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        NodePtr child = node->inputs[next++];
        if (child->requires_grad && seen.insert(child.get()).second) {
          stack.emplace_back(std::move(child), 0);
        }
      } else {
        order_.push_back(node);
        stack.pop_back();
      }
    }
  }

  NodePtr root_;
  std::vector<NodePtr> order_;
};

template <typename T>
void backward(const Tensor<T>& loss) {
  Graph<T>(loss).backward();
}

namespace detail {

// Builds an op result, recording inputs and the backward rule only when
// gradient recording is on and some input requires a gradient.
template <typename T>
Tensor<T> make_op(std::string op, Shape shape, std::vector<T> values,
                  std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward_rule) {
  auto node = std::make_shared<Node<T>>();
  node->op = std::move(op);
  node->shape = std::move(shape);
  node->value = std::move(values);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward_rule);
  }
  return Tensor<T>(std::move(node));
}

}  // namespace detail

}  // namespace depcause
