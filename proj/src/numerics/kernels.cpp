#include "dtp/numerics/kernels.hpp"

#include <algorithm>

namespace dtp {

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, Index stride, Padding padding) {
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (kernel.size() != 4) throw ShapeError("conv2d: kernel must be rank 4, got " + shape_str(kernel));
  ConvGeometry g;
  if (input.size() == 4) {
    g.batched = true;
    g.batch = input[0];
    g.in_h = input[1];
    g.in_w = input[2];
    g.in_c = input[3];
  } else if (input.size() == 3) {
    g.in_h = input[0];
    g.in_w = input[1];
    g.in_c = input[2];
  } else {
    throw ShapeError("conv2d: input must be rank 3 or 4, got " + shape_str(input));
  }
  g.k_h = kernel[0];
  g.k_w = kernel[1];
  g.out_c = kernel[3];
  g.stride = stride;
  if (kernel[2] != g.in_c) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel) + " does not match input " + shape_str(input) +
                     " channels");
  }
  if (g.in_h < 1 || g.in_w < 1) throw ShapeError("conv2d: empty input " + shape_str(input));
  if (padding == Padding::Same) {
    g.out_h = (g.in_h + stride - 1) / stride;
    g.out_w = (g.in_w + stride - 1) / stride;
    g.pad_top = std::max<Index>((g.out_h - 1) * stride + g.k_h - g.in_h, 0) / 2;
    g.pad_left = std::max<Index>((g.out_w - 1) * stride + g.k_w - g.in_w, 0) / 2;
  } else {
    if (g.k_h > g.in_h || g.k_w > g.in_w) {
      throw ShapeError("conv2d: kernel " + shape_str(kernel) + " larger than input " + shape_str(input) +
                       " under valid padding");
    }
    g.out_h = (g.in_h - g.k_h) / stride + 1;
    g.out_w = (g.in_w - g.k_w) / stride + 1;
  }
  return g;
}

namespace {

bool is_pointwise(const ConvGeometry& g) {
  return g.k_h == 1 && g.k_w == 1 && g.stride == 1 && g.out_h == g.in_h && g.out_w == g.in_w;
}

// Rows are output pixels, columns are (ky, kx, ci) in kernel row order.
template <typename Scalar>
typename Tensor<Scalar>::RowMatrix im2col(const Scalar* in, const ConvGeometry& g) {
  const Index patch = g.k_h * g.k_w * g.in_c;
  typename Tensor<Scalar>::RowMatrix cols = Tensor<Scalar>::RowMatrix::Zero(g.out_h * g.out_w, patch);
  for (Index oy = 0; oy < g.out_h; ++oy) {
    for (Index ox = 0; ox < g.out_w; ++ox) {
      Scalar* row = cols.row(oy * g.out_w + ox).data();
      for (Index ky = 0; ky < g.k_h; ++ky) {
        const Index iy = oy * g.stride + ky - g.pad_top;
        if (iy < 0 || iy >= g.in_h) continue;
        for (Index kx = 0; kx < g.k_w; ++kx) {
          const Index ix = ox * g.stride + kx - g.pad_left;
          if (ix < 0 || ix >= g.in_w) continue;
          std::copy_n(in + (iy * g.in_w + ix) * g.in_c, g.in_c, row + (ky * g.k_w + kx) * g.in_c);
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im_add(const typename Tensor<Scalar>::RowMatrix& cols, Scalar* out, const ConvGeometry& g) {
  for (Index oy = 0; oy < g.out_h; ++oy) {
    for (Index ox = 0; ox < g.out_w; ++ox) {
      const Scalar* row = cols.row(oy * g.out_w + ox).data();
      for (Index ky = 0; ky < g.k_h; ++ky) {
        const Index iy = oy * g.stride + ky - g.pad_top;
        if (iy < 0 || iy >= g.in_h) continue;
        for (Index kx = 0; kx < g.k_w; ++kx) {
          const Index ix = ox * g.stride + kx - g.pad_left;
          if (ix < 0 || ix >= g.in_w) continue;
          Scalar* dst = out + (iy * g.in_w + ix) * g.in_c;
          const Scalar* src = row + (ky * g.k_w + kx) * g.in_c;
          for (Index c = 0; c < g.in_c; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel, Index stride, Padding padding) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), stride, padding);
  Tensor<Scalar> out(g.output_shape());
  const Index in_px = g.in_h * g.in_w, out_px = g.out_h * g.out_w;
  const Index patch = g.k_h * g.k_w * g.in_c;
  const auto k = kernel.matrix(patch, g.out_c);
  for (Index n = 0; n < g.batch; ++n) {
    const Scalar* in = input.data() + n * in_px * g.in_c;
    typename Tensor<Scalar>::MatrixMap dst(out.data() + n * out_px * g.out_c, out_px, g.out_c);
    if (is_pointwise(g)) {
      typename Tensor<Scalar>::ConstMatrixMap x(in, in_px, g.in_c);
      dst.noalias() = x * k;
    } else {
      dst.noalias() = im2col(in, g) * k;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_grad_input(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& kernel,
                                 const ConvGeometry& g) {
  Tensor<Scalar> grad_in(g.batched ? Shape{g.batch, g.in_h, g.in_w, g.in_c} : Shape{g.in_h, g.in_w, g.in_c});
  const Index in_px = g.in_h * g.in_w, out_px = g.out_h * g.out_w;
  const Index patch = g.k_h * g.k_w * g.in_c;
  const auto k = kernel.matrix(patch, g.out_c);
  for (Index n = 0; n < g.batch; ++n) {
    typename Tensor<Scalar>::ConstMatrixMap go(grad_out.data() + n * out_px * g.out_c, out_px, g.out_c);
    Scalar* gi = grad_in.data() + n * in_px * g.in_c;
    if (is_pointwise(g)) {
      typename Tensor<Scalar>::MatrixMap dst(gi, in_px, g.in_c);
      dst.noalias() = go * k.transpose();
    } else {
      const typename Tensor<Scalar>::RowMatrix cols = go * k.transpose();
      col2im_add<Scalar>(cols, gi, g);
    }
  }
  return grad_in;
}

template <typename Scalar>
Tensor<Scalar> conv2d_grad_kernel(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out,
                                  const ConvGeometry& g) {
  Tensor<Scalar> grad_k({g.k_h, g.k_w, g.in_c, g.out_c});
  const Index in_px = g.in_h * g.in_w, out_px = g.out_h * g.out_w;
  const Index patch = g.k_h * g.k_w * g.in_c;
  auto dk = grad_k.matrix(patch, g.out_c);
  for (Index n = 0; n < g.batch; ++n) {
    const Scalar* in = input.data() + n * in_px * g.in_c;
    typename Tensor<Scalar>::ConstMatrixMap go(grad_out.data() + n * out_px * g.out_c, out_px, g.out_c);
    if (is_pointwise(g)) {
      typename Tensor<Scalar>::ConstMatrixMap x(in, in_px, g.in_c);
      dk.noalias() += x.transpose() * go;
    } else {
      dk.noalias() += im2col(in, g).transpose() * go;
    }
  }
  return grad_k;
}

template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& input, Index factor) {
  if (input.rank() != 3) throw ShapeError("pixel_shuffle: expected rank-3 input, got " + shape_str(input.shape()));
  if (factor < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
  const Index rr = factor * factor;
  if (input.channels() % rr != 0) {
    throw ShapeError("pixel_shuffle: channels of " + shape_str(input.shape()) + " not divisible by " +
                     std::to_string(rr));
  }
  const Index h = input.height(), w = input.width(), c = input.channels() / rr;
  Tensor<Scalar> out = Tensor<Scalar>::image(h * factor, w * factor, c);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index ch = 0; ch < c; ++ch)
        for (Index i = 0; i < factor; ++i)
          for (Index j = 0; j < factor; ++j)
            out(y * factor + i, x * factor + j, ch) = input(y, x, ch * rr + i * factor + j);
  return out;
}

template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& input, Index factor) {
  if (input.rank() != 3) {
    throw ShapeError("pixel_unshuffle: expected rank-3 input, got " + shape_str(input.shape()));
  }
  if (factor < 1 || input.height() % factor || input.width() % factor) {
    throw ShapeError("pixel_unshuffle: " + shape_str(input.shape()) + " not divisible by factor " +
                     std::to_string(factor));
  }
  const Index rr = factor * factor;
  const Index h = input.height() / factor, w = input.width() / factor, c = input.channels();
  Tensor<Scalar> out = Tensor<Scalar>::image(h, w, c * rr);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index ch = 0; ch < c; ++ch)
        for (Index i = 0; i < factor; ++i)
          for (Index j = 0; j < factor; ++j)
            out(y, x, ch * rr + i * factor + j) = input(y * factor + i, x * factor + j, ch);
  return out;
}

#define DTP_INSTANTIATE_KERNELS(S)                                                                  \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, Index, Padding);                    \
  template Tensor<S> conv2d_grad_input(const Tensor<S>&, const Tensor<S>&, const ConvGeometry&);   \
  template Tensor<S> conv2d_grad_kernel(const Tensor<S>&, const Tensor<S>&, const ConvGeometry&);  \
  template Tensor<S> pixel_shuffle(const Tensor<S>&, Index);                                        \
  template Tensor<S> pixel_unshuffle(const Tensor<S>&, Index);

DTP_INSTANTIATE_KERNELS(float)
DTP_INSTANTIATE_KERNELS(double)

}  // namespace dtp
