#pragma once

// Raw (non-differentiable) array kernels shared by the autodiff ops.

#include "dtp/numerics/tensor.hpp"

namespace dtp {

enum class Padding { Same, Valid };

/// Convolution arithmetic for an (N x) H x W x Cin input and a kh x kw x Cin x Cout kernel.
struct ConvGeometry {
  Index batch = 1;
  Index in_h = 0, in_w = 0, in_c = 0;
  Index k_h = 0, k_w = 0, out_c = 0;
  Index stride = 1;
  Index out_h = 0, out_w = 0;
  Index pad_top = 0, pad_left = 0;
  bool batched = false;

  Shape output_shape() const {
    return batched ? Shape{batch, out_h, out_w, out_c} : Shape{out_h, out_w, out_c};
  }
};

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, Index stride, Padding padding);

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel, Index stride = 1,
                      Padding padding = Padding::Same);

template <typename Scalar>
Tensor<Scalar> conv2d_grad_input(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& kernel,
                                 const ConvGeometry& g);

template <typename Scalar>
Tensor<Scalar> conv2d_grad_kernel(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out,
                                  const ConvGeometry& g);

/// Channel-to-space: H x W x (C*r*r) -> rH x rW x C, with
/// out(y*r+i, x*r+j, c) = in(y, x, c*r*r + i*r + j).
template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& input, Index factor);

/// Exact inverse of pixel_shuffle (space-to-channel).
template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& input, Index factor);

}  // namespace dtp
