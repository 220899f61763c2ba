#pragma once

// Dense tensors with a recorded backward graph.
//
// A Tensor is a shared handle to a Node. Operations produce nodes that keep
// their inputs alive and know how to push their gradient back into them.
// Leaves (parameters, inputs) accumulate gradients across backward passes
// until zero_grad(). A graph is consumed by backward(): interior nodes drop
// their links so the same forward cannot be differentiated twice.

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

#include "iqprint/error.hpp"

namespace iqprint::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t n = 0; n < s.size(); ++n) os << (n ? ", " : "") << s[n];
  os << ']';
  return os.str();
}

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T{0});
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value.assign(numel(shape), fill);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    if (values.size() != numel(shape))
      throw ShapeError("tensor of shape " + to_string(shape) + " needs " + std::to_string(numel(shape)) +
                       " values, got " + std::to_string(values.size()));
    node_->value = std::move(values);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  static Tensor parameter(Shape shape, std::vector<T> values) { return Tensor(std::move(shape), std::move(values), true); }

  explicit operator bool() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  // Direct write access; only meaningful on leaves (parameters, buffers, inputs).
  std::span<T> mutable_values() { return node_->value; }
  const T& operator[](std::size_t n) const { return node_->value[n]; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T{0}); }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }

  T item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }

  // Same values, no history, no gradient.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& handle() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

/// Disables graph recording on this thread while alive (inference).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Builds an op result. The backward closure is recorded only when some input
/// requires a gradient; it receives the result node and must add into the
/// gradients of inputs that require one.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  Tensor<T> out(std::move(shape), std::move(value), false);
  bool any = false;
  for (const auto& in : inputs) {
    if (in.node()->consumed) throw GraphError("operation on a tensor from an already-differentiated graph");
    any = any || in.requires_grad();
  }
  if (any && grad_mode()) {
    Node<T>* n = out.node();
    n->requires_grad = true;
    n->leaf = false;
    for (auto& in : inputs) n->inputs.push_back(in.handle());
    n->backward = std::move(backward);
  }
  return out;
}

// Gradient buffer of input `k` of `self`, or nullptr when it needs none.
template <typename T>
T* input_grad(Node<T>& self, std::size_t k) {
  auto& in = *self.inputs[k];
  return in.requires_grad ? in.ensure_grad().data() : nullptr;
}

template <typename T>
const T* input_value(const Node<T>& self, std::size_t k) {
  return self.inputs[k]->value.data();
}

/// Reverse-mode pass from a scalar loss. Leaves accumulate into their grad;
/// the interior of the graph is released afterwards.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss) throw GraphError("backward on an empty tensor");
  if (loss.node()->consumed) throw GraphError("backward on an already-consumed graph");
  if (!loss.requires_grad()) throw GraphError("backward on a detached tensor (no recorded graph)");
  if (loss.size() != 1) throw ShapeError("backward needs a scalar loss, got shape " + to_string(loss.shape()));

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && !child->leaf && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  for (Node<T>* node : order) {
    node->backward = nullptr;
    node->inputs.clear();
    node->consumed = true;
    std::vector<T>().swap(node->grad);
  }
}

}  // namespace iqprint::nn
