#pragma once

// Minimal reverse-mode differentiation over Tensor values.
//
// A Var is a shared handle to a graph node. Ops produce a new node holding the
// forward value and, when gradients are enabled and any input requires them,
// a backward closure that accumulates into the inputs' gradient buffers.
// Graphs are released when the last Var referencing them goes away, so each
// training step builds a fresh graph.

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "cartoon/tensor.hpp"

namespace cr {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialized on first use.
  Tensor<T>& grad_ref() {
    if (grad.empty() && value.numel() > 0) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool is_leaf() const { return !backward_fn; }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->grad_ref(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const Shape& shape() const { return node_->value.shape(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Wraps an op result. `fn` receives the result node; its grad is populated.
/// Parents that do not require gradients are still kept so the closure can
/// read their values; undefined (optional) parents are dropped, so they must
/// come last in `parents`.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> fn) {
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
      if (p.defined()) node->parents.push_back(p.node());
    }
    node->backward_fn = std::move(fn);
  }
  return Var<T>(std::move(node));
}

/// Seeds d(root)/d(root) = 1 (root must hold one element) and propagates.
/// Interior gradient buffers are released once consumed; leaf gradients
/// accumulate across calls until zeroed.
template <typename T>
void backward(const Var<T>& root);

extern template void backward<float>(const Var<float>&);
extern template void backward<double>(const Var<double>&);

}  // namespace cr
