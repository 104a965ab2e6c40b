#pragma once

// Shared helpers for the unit tests: seeded random tensors and reference
// implementations written without the library's kernels.

#include "dtp/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dtp::test {

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  double m = 0.0;
  for (Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

/// Direct six-loop convolution, unbatched H x W x Cin input, TF-style padding.
inline Tensor<double> naive_conv2d(const Tensor<double>& in, const Tensor<double>& k, Index stride, bool same) {
  const Index h = in.dim(0), w = in.dim(1), ci = in.dim(2);
  const Index kh = k.dim(0), kw = k.dim(1), co = k.dim(3);
  Index oh, ow, pt = 0, pl = 0;
  if (same) {
    oh = (h + stride - 1) / stride;
    ow = (w + stride - 1) / stride;
    pt = std::max<Index>(0, (oh - 1) * stride + kh - h) / 2;
    pl = std::max<Index>(0, (ow - 1) * stride + kw - w) / 2;
  } else {
    oh = (h - kh) / stride + 1;
    ow = (w - kw) / stride + 1;
  }
  Tensor<double> out({oh, ow, co});
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < ow; ++x)
      for (Index o = 0; o < co; ++o) {
        double acc = 0.0;
        for (Index i = 0; i < kh; ++i)
          for (Index j = 0; j < kw; ++j)
            for (Index c = 0; c < ci; ++c) {
              const Index yy = y * stride + i - pt, xx = x * stride + j - pl;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += in(yy, xx, c) * k[((i * kw + j) * ci + c) * co + o];
            }
        out(y, x, o) = acc;
      }
  return out;
}

}  // namespace dtp::test
