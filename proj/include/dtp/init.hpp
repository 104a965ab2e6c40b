#pragma once

#include "dtp/numerics/tensor.hpp"

#include <random>

namespace dtp::init {

/// Zero-mean Gaussian draw in row-major order; deterministic for a given engine state.
template <typename Scalar>
Tensor<Scalar> normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<Scalar> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
Tensor<Scalar> uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor<Scalar> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

}  // namespace dtp::init
