#include "dtp/numerics/autodiff.hpp"

#include <unordered_set>

namespace dtp {

namespace {
thread_local BranchTrace* g_trace = nullptr;
}

BranchTrace* active_branch_trace() { return g_trace; }

BranchTraceScope::BranchTraceScope(BranchTrace& trace) : previous_(g_trace) { g_trace = &trace; }
BranchTraceScope::~BranchTraceScope() { g_trace = previous_; }

template <typename Scalar>
void backward(const Var<Scalar>& root) {
  if (root.value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;

  using NodeT = Node<Scalar>;
  // Iterative post-order DFS; reverse of the result is a topological order.
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeT* n : order) n->grad = Tensor<Scalar>();
  root.node()->grad = Tensor<Scalar>(root.shape(), Scalar(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::param(Index i) {
  auto& leaf = leaves_.at(static_cast<std::size_t>(i));
  if (!leaf.valid()) {
    const auto& e = store_->entry(i);
    auto n = std::make_shared<Node<Scalar>>();
    n->value = e.value;
    n->requires_grad = e.learnable;
    n->param_index = i;
    leaf = Var<Scalar>(std::move(n));
  }
  return leaf;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> Graph<Scalar>::gradients(const Var<Scalar>& loss) {
  backward(loss);
  std::vector<Tensor<Scalar>> grads;
  grads.reserve(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const auto& leaf = leaves_[i];
    if (leaf.valid() && leaf.requires_grad() && !leaf.node()->grad.empty()) {
      grads.push_back(leaf.node()->grad);
    } else {
      grads.emplace_back(store_->entry(static_cast<Index>(i)).value.shape());
    }
  }
  return grads;
}

template <typename Scalar>
void Graph<Scalar>::backward_into(const Var<Scalar>& loss, ParamStore<Scalar>& store) {
  auto grads = gradients(loss);
  for (Index i = 0; i < store.size(); ++i) store.entry(i).grad = std::move(grads[static_cast<std::size_t>(i)]);
}

template void backward(const Var<float>&);
template void backward(const Var<double>&);
template class Graph<float>;
template class Graph<double>;

}  // namespace dtp
