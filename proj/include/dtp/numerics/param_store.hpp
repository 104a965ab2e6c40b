#pragma once

#include "dtp/numerics/tensor.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace dtp {

/// Named parameter tensors in insertion order. The order is the iteration,
/// serialization and gradient-vector order everywhere.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    bool learnable = true;
  };

  Index add(std::string name, Tensor<Scalar> value, bool learnable = true) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    const Index i = size();
    index_.emplace(name, i);
    Tensor<Scalar> grad(value.shape());
    entries_.push_back(Entry{std::move(name), std::move(value), std::move(grad), learnable});
    return i;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Index index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }

  Index size() const { return static_cast<Index>(entries_.size()); }

  Entry& entry(Index i) { return entries_.at(static_cast<std::size_t>(i)); }
  const Entry& entry(Index i) const { return entries_.at(static_cast<std::size_t>(i)); }
  Entry& entry(const std::string& name) { return entry(index_of(name)); }
  const Entry& entry(const std::string& name) const { return entry(index_of(name)); }

  Tensor<Scalar>& value(const std::string& name) { return entry(name).value; }
  const Tensor<Scalar>& value(const std::string& name) const { return entry(name).value; }
  Tensor<Scalar>& grad(const std::string& name) { return entry(name).grad; }
  const Tensor<Scalar>& grad(const std::string& name) const { return entry(name).grad; }

  void set_learnable(const std::string& name, bool learnable) { entry(name).learnable = learnable; }

  /// Every entry whose name starts with `prefix`.
  std::vector<Index> with_prefix(const std::string& prefix) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (entries_[static_cast<std::size_t>(i)].name.rfind(prefix, 0) == 0) out.push_back(i);
    return out;
  }

  void zero_grad() {
    for (auto& e : entries_) e.grad.array().setZero();
  }

  Index scalar_count() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<Other>(), e.learnable);
    return out;
  }

  /// Values and flags equal; gradients are not compared.
  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto& x = a.entries_[i];
      const auto& y = b.entries_[i];
      if (x.name != y.name || x.learnable != y.learnable || !(x.value == y.value)) return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, Index> index_;
};

}  // namespace dtp
