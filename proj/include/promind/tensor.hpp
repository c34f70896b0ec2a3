#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "promind/rng.hpp"

namespace promind::num {

// Dense row-major tensor (rank 0..2 in practice) with reverse-mode autodiff.
// Instantiated at float for the pipeline and double for gradient checks.
template <typename T>
class Tensor {
 public:
  struct Impl;

  struct Node {
    std::vector<Tensor> parents;
    // Receives the output impl (values + grad) after the output grad is final.
    std::function<void(const Impl&)> backward;
    bool consumed{false};
  };

  struct Impl {
    std::vector<size_t> shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until backward touches it
    bool requires_grad{false};
    std::shared_ptr<Node> node;

    void ensure_grad() {
      if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    }
  };

  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->values.assign(count(t.impl_->shape), T(0));
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(std::vector<size_t> shape, T value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.impl_->values) v = value;
    return t;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from({}, {value}, requires_grad);
  }

  static Tensor from(std::vector<size_t> shape, std::vector<T> values,
                     bool requires_grad = false) {
    if (count(shape) != values.size()) {
      throw std::invalid_argument("tensor: shape does not match value count");
    }
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->values = std::move(values);
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor randn(std::vector<size_t> shape, Rng& rng, T stddev,
                      bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.impl_->values) v = static_cast<T>(rng.normal(0.0, stddev));
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<size_t>& shape() const { return impl_->shape; }
  size_t numel() const { return impl_->values.size(); }
  size_t rank() const { return impl_->shape.size(); }

  size_t rows() const { return rank() >= 1 ? impl_->shape[0] : 1; }
  size_t cols() const {
    if (rank() == 2) return impl_->shape[1];
    if (rank() == 1) return impl_->shape[0];
    return 1;
  }

  std::vector<T>& values() { return impl_->values; }
  const std::vector<T>& values() const { return impl_->values; }
  T* data() { return impl_->values.data(); }
  const T* data() const { return impl_->values.data(); }

  T item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor is not scalar");
    return impl_->values[0];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    return *this;
  }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<T>& grad() const {
    if (impl_->grad.empty()) throw std::runtime_error("grad: no gradient populated");
    return impl_->grad;
  }
  void zero_grad() {
    if (impl_) impl_->grad.assign(impl_->values.size(), T(0));
  }

  Impl* impl() const { return impl_.get(); }
  std::shared_ptr<Impl> impl_ptr() const { return impl_; }

  // Detached copy of values (no graph, no grad flag).
  Tensor detach() const { return from(impl_->shape, impl_->values, false); }

  static size_t count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }

  void attach_node(std::vector<Tensor> parents, std::function<void(const Impl&)> fn) {
    impl_->node = std::make_shared<Node>();
    impl_->node->parents = std::move(parents);
    impl_->node->backward = std::move(fn);
    impl_->requires_grad = true;
  }

 private:
  std::shared_ptr<Impl> impl_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.values()) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw std::runtime_error(std::string(op) + ": non-finite value produced");
    }
  }
}

template <typename T>
inline bool any_requires_grad(std::initializer_list<const Tensor<T>*> ts) {
  for (const Tensor<T>* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Runs reverse-mode accumulation from a scalar loss. The recorded graph is
// consumable exactly once; reusing it is an error.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  using Impl = typename Tensor<T>::Impl;
  Impl* root = loss.impl();
  if (!root->node && !root->requires_grad) {
    throw std::runtime_error("backward: loss is detached from any graph");
  }

  // Post-order topological sort over impl pointers.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> seen;
  std::vector<std::pair<Impl*, size_t>> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (!node->node || idx >= node->node->parents.size()) {
      order.push_back(node);
      stack.pop_back();
      continue;
    }
    Impl* parent = node->node->parents[idx++].impl();
    if (!seen.count(parent)) {
      seen.insert(parent);
      stack.push_back({parent, 0});
    }
  }

  for (Impl* n : order) {
    if (n->node && n->node->consumed) {
      throw std::runtime_error("backward: graph already consumed");
    }
  }

  root->ensure_grad();
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* n = *it;
    if (!n->node) continue;
    n->ensure_grad();
    n->node->backward(*n);
    n->node->consumed = true;
  }
}

}  // namespace promind::num
