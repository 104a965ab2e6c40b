#pragma once

#include "dtp/numerics/param_store.hpp"

#include <cmath>
#include <vector>

namespace dtp {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias correction. Reads the store's grad
/// buffers and updates learnable entries only.
template <typename Scalar>
class Adam {
 public:
  Adam(const ParamStore<Scalar>& store, AdamConfig config) : config_(config) {
    for (const auto& e : store) {
      m_.emplace_back(e.value.shape());
      v_.emplace_back(e.value.shape());
    }
  }

  void step(ParamStore<Scalar>& store) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    const Scalar lr = static_cast<Scalar>(config_.learning_rate);
    const Scalar eps = static_cast<Scalar>(config_.epsilon);
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta1, static_cast<double>(t_)));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta2, static_cast<double>(t_)));
    for (Index i = 0; i < store.size(); ++i) {
      auto& e = store.entry(i);
      if (!e.learnable) continue;
      auto& m = m_[static_cast<std::size_t>(i)].array();
      auto& v = v_[static_cast<std::size_t>(i)].array();
      const auto& g = e.grad.array();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      e.value.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace dtp
