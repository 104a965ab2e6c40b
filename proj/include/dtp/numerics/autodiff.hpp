#pragma once

// Reverse-mode differentiation over a recorded graph of Var nodes.
//
// Every op allocates a Node holding its value, its parents and a backward
// closure. Nodes that do not depend on any gradient-requiring leaf drop their
// parents at construction, so constant subgraphs cost nothing in backward.

#include "dtp/numerics/param_store.hpp"
#include "dtp/numerics/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dtp {

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  Index param_index = -1;

  void accumulate(const Tensor<Scalar>& g) {
    if (!requires_grad) return;
    if (grad.empty() && !g.empty()) {
      grad = g;
    } else {
      require_same_shape(grad.shape(), g.shape(), "gradient accumulation");
      grad.array() += g.array();
    }
  }
  Node& parent(std::size_t i) { return *parents[i]; }
};

template <typename Scalar>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor<Scalar>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return static_cast<bool>(node_); }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Leaf that never receives gradient.
template <typename Scalar>
Var<Scalar> constant(Tensor<Scalar> value) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  return Var<Scalar>(std::move(n));
}

template <typename Scalar>
Var<Scalar> constant_scalar(Scalar v) {
  return constant(Tensor<Scalar>::scalar(v));
}

/// Leaf that accumulates gradient (used by tests and by Graph::param).
template <typename Scalar>
Var<Scalar> variable(Tensor<Scalar> value) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var<Scalar>(std::move(n));
}

/// Records an op result. `backward` reads node.grad and accumulates into parents.
template <typename Scalar>
Var<Scalar> make_op(Tensor<Scalar> value, std::vector<Var<Scalar>> inputs,
                    std::function<void(Node<Scalar>&)> backward) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  for (const auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node());
    n->backward = std::move(backward);
  }
  return Var<Scalar>(std::move(n));
}

/// Runs reverse accumulation from a scalar root. Gradients land in each
/// reachable node's `grad`; leaves are left populated for the caller.
template <typename Scalar>
void backward(const Var<Scalar>& root);

/// Hash of the branch decisions taken by nonsmooth ops (clamp, leaky ramp,
/// abs, max pooling) while a scope is active on this thread. Two evaluations
/// with equal signatures lie on the same smooth piece of the function.
class BranchTrace {
 public:
  void record(bool branch) {
    hash_ = (hash_ ^ (branch ? 0x9e3779b97f4a7c15ULL : 0x7f4a7c159e3779b9ULL)) * 0x100000001b3ULL;
  }
  void record_index(Index i) { hash_ = (hash_ ^ static_cast<std::uint64_t>(i + 1)) * 0x100000001b3ULL; }
  std::uint64_t signature() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

BranchTrace* active_branch_trace();

class BranchTraceScope {
 public:
  explicit BranchTraceScope(BranchTrace& trace);
  ~BranchTraceScope();
  BranchTraceScope(const BranchTraceScope&) = delete;
  BranchTraceScope& operator=(const BranchTraceScope&) = delete;

 private:
  BranchTrace* previous_;
};

/// Binds a ParamStore into one recorded computation. Each parameter becomes
/// a leaf Var holding a copy of its value; learnable leaves require grad.
template <typename Scalar>
class Graph {
 public:
  explicit Graph(const ParamStore<Scalar>& store) : store_(&store), leaves_(static_cast<std::size_t>(store.size())) {}

  Var<Scalar> param(const std::string& name) { return param(store_->index_of(name)); }
  Var<Scalar> param(Index i);

  const ParamStore<Scalar>& store() const { return *store_; }

  /// Gradient of `loss` for every store entry, in store order. Entries that are
  /// frozen or unreachable get zeros.
  std::vector<Tensor<Scalar>> gradients(const Var<Scalar>& loss);

  /// Convenience: gradients() written into the store's grad buffers.
  void backward_into(const Var<Scalar>& loss, ParamStore<Scalar>& store);

 private:
  const ParamStore<Scalar>* store_;
  std::vector<Var<Scalar>> leaves_;
};

extern template void backward(const Var<float>&);
extern template void backward(const Var<double>&);
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace dtp
