#include "dtp/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dtp {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    const Index da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const Index db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("broadcast: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    }
    out[k] = da == 1 ? db : da;
  }
  return out;
}

namespace {

// Maps every output element to the source element of an operand broadcast into `out`.
std::vector<Index> broadcast_index(const Shape& src, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - src.size();
  std::vector<Index> src_stride(rank, 0);
  Index stride = 1;
  for (std::size_t k = rank; k-- > offset;) {
    const Index extent = src[k - offset];
    src_stride[k] = extent == 1 ? 0 : stride;
    stride *= extent;
  }
  const Index total = shape_size(out);
  std::vector<Index> map(static_cast<std::size_t>(total));
  std::vector<Index> counter(rank, 0);
  Index pos = 0;
  for (Index i = 0; i < total; ++i) {
    map[static_cast<std::size_t>(i)] = pos;
    for (std::size_t k = rank; k-- > 0;) {
      ++counter[k];
      pos += src_stride[k];
      if (counter[k] < out[k]) break;
      pos -= src_stride[k] * out[k];
      counter[k] = 0;
    }
  }
  return map;
}

struct Broadcast {
  Shape out;
  Index size = 0;
  std::vector<Index> ia, ib;
  bool a_same = true, b_same = true;

  Broadcast(const Shape& a, const Shape& b) : out(broadcast_shape(a, b)) {
    size = shape_size(out);
    a_same = a == out;
    b_same = b == out;
    if (!a_same) ia = broadcast_index(a, out);
    if (!b_same) ib = broadcast_index(b, out);
  }
  Index a(Index i) const { return a_same ? i : ia[static_cast<std::size_t>(i)]; }
  Index b(Index i) const { return b_same ? i : ib[static_cast<std::size_t>(i)]; }
};

// Generic broadcasting binary op. `da(x, y, out)` and `db(x, y, out)` are the
// partial derivatives of f at (x, y).
template <typename S, typename F, typename DA, typename DB>
Var<S> binary(const Var<S>& a, const Var<S>& b, F f, DA da, DB db) {
  auto bc = std::make_shared<Broadcast>(a.shape(), b.shape());
  Tensor<S> out(bc->out);
  const auto& x = a.value();
  const auto& y = b.value();
  for (Index i = 0; i < bc->size; ++i) out[i] = f(x[bc->a(i)], y[bc->b(i)]);
  return make_op<S>(std::move(out), {a, b}, [bc, da, db](Node<S>& n) {
    Node<S>& pa = n.parent(0);
    Node<S>& pb = n.parent(1);
    const auto& x = pa.value;
    const auto& y = pb.value;
    if (pa.requires_grad) {
      Tensor<S> g(x.shape());
      for (Index i = 0; i < bc->size; ++i) g[bc->a(i)] += n.grad[i] * da(x[bc->a(i)], y[bc->b(i)], n.value[i]);
      pa.accumulate(g);
    }
    if (pb.requires_grad) {
      Tensor<S> g(y.shape());
      for (Index i = 0; i < bc->size; ++i) g[bc->b(i)] += n.grad[i] * db(x[bc->a(i)], y[bc->b(i)], n.value[i]);
      pb.accumulate(g);
    }
  });
}

// Elementwise unary op; `df(x, y)` is the derivative at x given y = f(x).
template <typename S, typename F, typename DF>
Var<S> unary(const Var<S>& a, F f, DF df) {
  Tensor<S> out(a.shape());
  const auto& x = a.value();
  for (Index i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make_op<S>(std::move(out), {a}, [df](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    for (Index i = 0; i < g.size(); ++i) g[i] = n.grad[i] * df(p.value[i], n.value[i]);
    p.accumulate(g);
  });
}

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
  }
}

// Splits a rank-3 shape around `axis` into (outer, extent, inner) strides.
struct AxisView {
  Index outer, extent, inner;
};

AxisView axis_view(const Shape& s, int axis) {
  require_rank(s, 3, "axis op");
  if (axis == 0) return {1, s[0], s[1] * s[2]};
  if (axis == 1) return {s[0], s[1], s[2]};
  throw ShapeError("axis op: axis must be 0 or 1");
}

Index neighbor_index(Index n, Index extent, Neighbor nb) {
  return nb == Neighbor::Next ? std::min(n + 1, extent - 1) : std::max<Index>(n - 1, 0);
}

template <typename S>
Tensor<S> shift_gather(const Tensor<S>& src, int axis, Neighbor nb) {
  const AxisView v = axis_view(src.shape(), axis);
  Tensor<S> out(src.shape());
  for (Index o = 0; o < v.outer; ++o)
    for (Index n = 0; n < v.extent; ++n) {
      const Index from = neighbor_index(n, v.extent, nb);
      const S* s = src.data() + (o * v.extent + from) * v.inner;
      std::copy_n(s, v.inner, out.data() + (o * v.extent + n) * v.inner);
    }
  return out;
}

// Transpose of shift_gather.
template <typename S>
Tensor<S> shift_scatter(const Tensor<S>& g, int axis, Neighbor nb) {
  const AxisView v = axis_view(g.shape(), axis);
  Tensor<S> out(g.shape());
  for (Index o = 0; o < v.outer; ++o)
    for (Index n = 0; n < v.extent; ++n) {
      const Index to = neighbor_index(n, v.extent, nb);
      const S* s = g.data() + (o * v.extent + n) * v.inner;
      S* d = out.data() + (o * v.extent + to) * v.inner;
      for (Index k = 0; k < v.inner; ++k) d[k] += s[k];
    }
  return out;
}

}  // namespace

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  return binary(
      a, b, [](S x, S y) { return x + y; }, [](S, S, S) { return S(1); }, [](S, S, S) { return S(1); });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  return binary(
      a, b, [](S x, S y) { return x - y; }, [](S, S, S) { return S(1); }, [](S, S, S) { return S(-1); });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  return binary(
      a, b, [](S x, S y) { return x * y; }, [](S, S y, S) { return y; }, [](S x, S, S) { return x; });
}

template <typename S>
Var<S> div(const Var<S>& a, const Var<S>& b) {
  return binary(
      a, b, [](S x, S y) { return x / y; }, [](S, S y, S) { return S(1) / y; },
      [](S, S y, S out) { return -out / y; });
}

template <typename S>
Var<S> scale(const Var<S>& a, S factor) {
  Tensor<S> out(a.shape(), a.value().array() * factor);
  return make_op<S>(std::move(out), {a}, [factor](Node<S>& n) {
    n.parent(0).accumulate(Tensor<S>(n.grad.shape(), n.grad.array() * factor));
  });
}

template <typename S>
Var<S> add_scalar(const Var<S>& a, S offset) {
  Tensor<S> out(a.shape(), a.value().array() + offset);
  return make_op<S>(std::move(out), {a}, [](Node<S>& n) { n.parent(0).accumulate(n.grad); });
}

template <typename S>
Var<S> pow(const Var<S>& base, const Var<S>& exponent) {
  if (exponent.value().size() != 1) {
    throw ShapeError("pow: exponent must be a scalar, got " + shape_str(exponent.shape()));
  }
  if ((base.value().array() < S(0)).any()) throw std::domain_error("pow: base must be nonnegative");
  const S p = exponent.value()[0];
  Tensor<S> out(base.shape());
  for (Index i = 0; i < out.size(); ++i) {
    const S x = base.value()[i];
    out[i] = x > S(0) ? std::exp(p * std::log(x)) : S(0);
  }
  return make_op<S>(std::move(out), {base, exponent}, [p](Node<S>& n) {
    Node<S>& pb = n.parent(0);
    Node<S>& pe = n.parent(1);
    if (pb.requires_grad) {
      Tensor<S> g(pb.value.shape());
      for (Index i = 0; i < g.size(); ++i) {
        const S x = pb.value[i];
        g[i] = x > S(0) ? n.grad[i] * p * n.value[i] / x : S(0);
      }
      pb.accumulate(g);
    }
    if (pe.requires_grad) {
      S acc = 0;
      for (Index i = 0; i < n.value.size(); ++i) {
        const S x = pb.value[i];
        if (x > S(0)) acc += n.grad[i] * n.value[i] * std::log(x);
      }
      pe.accumulate(Tensor<S>(pe.value.shape(), acc));
    }
  });
}

template <typename S>
Var<S> exp(const Var<S>& a) {
  return unary(a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> log(const Var<S>& a) {
  return unary(a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

template <typename S>
Var<S> sqrt(const Var<S>& a) {
  return unary(a, [](S x) { return std::sqrt(x); }, [](S, S y) { return S(0.5) / y; });
}

namespace {
template <typename S>
S stable_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}
}  // namespace

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  return unary(a, [](S x) { return stable_sigmoid(x); }, [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> softplus(const Var<S>& a) {
  return unary(
      a, [](S x) { return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x))); },
      [](S x, S) { return stable_sigmoid(x); });
}

template <typename S>
Var<S> leaky_relu(const Var<S>& a, S negative_slope) {
  if (auto* trace = active_branch_trace())
    for (Index i = 0; i < a.value().size(); ++i) trace->record(a.value()[i] >= S(0));
  return unary(
      a, [negative_slope](S x) { return x >= S(0) ? x : negative_slope * x; },
      [negative_slope](S x, S) { return x >= S(0) ? S(1) : negative_slope; });
}

template <typename S>
Var<S> abs(const Var<S>& a) {
  if (auto* trace = active_branch_trace())
    for (Index i = 0; i < a.value().size(); ++i) trace->record(a.value()[i] >= S(0));
  return unary(
      a, [](S x) { return std::abs(x); },
      [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
}

template <typename S>
Var<S> clamp(const Var<S>& a, S lo, S hi) {
  if (auto* trace = active_branch_trace()) {
    for (Index i = 0; i < a.value().size(); ++i) {
      trace->record(a.value()[i] < lo);
      trace->record(a.value()[i] > hi);
    }
  }
  return unary(
      a, [lo, hi](S x) { return std::clamp(x, lo, hi); },
      [lo, hi](S x, S) { return (x >= lo && x <= hi) ? S(1) : S(0); });
}

template <typename S>
Var<S> saturating_ratio(const Var<S>& num, const Var<S>& offset) {
  if (offset.value().size() != 1) {
    throw ShapeError("saturating_ratio: offset must be a scalar, got " + shape_str(offset.shape()));
  }
  const S off = offset.value()[0];
  Tensor<S> out(num.shape());
  for (Index i = 0; i < out.size(); ++i) {
    const S den = num.value()[i] + off;
    out[i] = den != S(0) ? num.value()[i] / den : S(0);
  }
  return make_op<S>(std::move(out), {num, offset}, [off](Node<S>& n) {
    Node<S>& pn = n.parent(0);
    Node<S>& po = n.parent(1);
    Tensor<S> gn(pn.value.shape());
    S go = 0;
    for (Index i = 0; i < gn.size(); ++i) {
      const S den = pn.value[i] + off;
      if (den == S(0)) continue;
      const S inv2 = S(1) / (den * den);
      gn[i] = n.grad[i] * off * inv2;
      go -= n.grad[i] * pn.value[i] * inv2;
    }
    pn.accumulate(gn);
    po.accumulate(Tensor<S>(po.value.shape(), go));
  });
}

template <typename S>
Var<S> sum(const Var<S>& a) {
  return make_op<S>(Tensor<S>::scalar(a.value().array().sum()), {a}, [](Node<S>& n) {
    Node<S>& p = n.parent(0);
    p.accumulate(Tensor<S>(p.value.shape(), n.grad[0]));
  });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  const Index count = a.value().size();
  if (count == 0) throw ShapeError("mean: empty tensor");
  return make_op<S>(Tensor<S>::scalar(a.value().array().sum() / S(count)), {a}, [count](Node<S>& n) {
    Node<S>& p = n.parent(0);
    p.accumulate(Tensor<S>(p.value.shape(), n.grad[0] / S(count)));
  });
}

template <typename S>
Var<S> spatial_mean(const Var<S>& a) {
  require_rank(a.shape(), 3, "spatial_mean");
  const Index px = a.shape()[0] * a.shape()[1], c = a.shape()[2];
  Tensor<S> out({1, 1, c});
  out.matrix(1, c) = a.value().matrix(px, c).colwise().sum() / S(px);
  return make_op<S>(std::move(out), {a}, [px, c](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    g.matrix(px, c) = (n.grad.matrix(1, c) / S(px)).replicate(px, 1);
    p.accumulate(g);
  });
}

template <typename S>
Var<S> channel_mean(const Var<S>& a) {
  require_rank(a.shape(), 3, "channel_mean");
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  Tensor<S> out({h, w, 1});
  out.matrix(h * w, 1) = a.value().matrix(h * w, c).rowwise().sum() / S(c);
  return make_op<S>(std::move(out), {a}, [h, w, c](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    g.matrix(h * w, c) = (n.grad.matrix(h * w, 1) / S(c)).replicate(1, c);
    p.accumulate(g);
  });
}

template <typename S>
Var<S> channel_max(const Var<S>& a) {
  require_rank(a.shape(), 3, "channel_max");
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  if (c < 1) throw ShapeError("channel_max: no channels");
  Tensor<S> out({h, w, 1});
  auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(h * w));
  BranchTrace* trace = active_branch_trace();
  for (Index p = 0; p < h * w; ++p) {
    const S* row = a.value().data() + p * c;
    Index best = 0;
    for (Index k = 1; k < c; ++k)
      if (row[k] > row[best]) best = k;
    (*argmax)[static_cast<std::size_t>(p)] = best;
    out[p] = row[best];
    if (trace) trace->record_index(best);
  }
  return make_op<S>(std::move(out), {a}, [argmax, c](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    for (Index i = 0; i < n.grad.size(); ++i) g[i * c + (*argmax)[static_cast<std::size_t>(i)]] = n.grad[i];
    p.accumulate(g);
  });
}

template <typename S>
Var<S> softmax(const Var<S>& a) {
  require_rank(a.shape(), 1, "softmax");
  const auto& x = a.value().array();
  Tensor<S> out(a.shape(), (x - x.maxCoeff()).exp().eval());
  out.array() /= out.array().sum();
  return make_op<S>(std::move(out), {a}, [](Node<S>& n) {
    const auto& y = n.value.array();
    const S dot = (n.grad.array() * y).sum();
    n.parent(0).accumulate(Tensor<S>(n.value.shape(), (y * (n.grad.array() - dot)).eval()));
  });
}

template <typename S>
Var<S> element(const Var<S>& a, Index i) {
  require_rank(a.shape(), 1, "element");
  if (i < 0 || i >= a.value().size()) throw ShapeError("element: index out of range");
  return make_op<S>(Tensor<S>::scalar(a.value()[i]), {a}, [i](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    g[i] = n.grad[0];
    p.accumulate(g);
  });
}

template <typename S>
Var<S> reshape(const Var<S>& a, Shape shape) {
  return make_op<S>(a.value().reshaped(std::move(shape)), {a}, [](Node<S>& n) {
    Node<S>& p = n.parent(0);
    p.accumulate(n.grad.reshaped(p.value.shape()));
  });
}

template <typename S>
Var<S> concat_channels(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  require_rank(parts[0].shape(), 3, "concat_channels");
  const Index h = parts[0].shape()[0], w = parts[0].shape()[1];
  std::vector<Index> widths;
  Index total = 0;
  for (const auto& p : parts) {
    require_rank(p.shape(), 3, "concat_channels");
    if (p.shape()[0] != h || p.shape()[1] != w) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    widths.push_back(p.shape()[2]);
    total += p.shape()[2];
  }
  Tensor<S> out({h, w, total});
  auto dst = out.matrix(h * w, total);
  Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    dst.middleCols(offset, widths[k]) = parts[k].value().matrix(h * w, widths[k]);
    offset += widths[k];
  }
  return make_op<S>(std::move(out), parts, [h, w, total, widths](Node<S>& n) {
    const auto src = n.grad.matrix(h * w, total);
    Index offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node<S>& p = n.parent(k);
      if (p.requires_grad) {
        Tensor<S> g(p.value.shape());
        g.matrix(h * w, widths[k]) = src.middleCols(offset, widths[k]);
        p.accumulate(g);
      }
      offset += widths[k];
    }
  });
}

template <typename S>
Var<S> slice_channels(const Var<S>& a, Index begin, Index count) {
  require_rank(a.shape(), 3, "slice_channels");
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  if (begin < 0 || count < 0 || begin + count > c) {
    throw ShapeError("slice_channels: range out of bounds for " + shape_str(a.shape()));
  }
  Tensor<S> out({h, w, count});
  out.matrix(h * w, count) = a.value().matrix(h * w, c).middleCols(begin, count);
  return make_op<S>(std::move(out), {a}, [h, w, c, begin, count](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    g.matrix(h * w, c).middleCols(begin, count) = n.grad.matrix(h * w, count);
    p.accumulate(g);
  });
}

template <typename S>
Var<S> conv2d(const Var<S>& input, const Var<S>& kernel, Index stride, Padding padding) {
  const ConvGeometry g = conv_geometry(input.shape(), kernel.shape(), stride, padding);
  Tensor<S> out = conv2d(input.value(), kernel.value(), stride, padding);
  return make_op<S>(std::move(out), {input, kernel}, [g](Node<S>& n) {
    Node<S>& in = n.parent(0);
    Node<S>& k = n.parent(1);
    if (in.requires_grad) in.accumulate(conv2d_grad_input(n.grad, k.value, g));
    if (k.requires_grad) k.accumulate(conv2d_grad_kernel(in.value, n.grad, g));
  });
}

template <typename S>
Var<S> conv2d(const Var<S>& input, const Var<S>& kernel, const Var<S>& bias) {
  return add(conv2d(input, kernel, 1, Padding::Same), bias);
}

template <typename S>
Var<S> pixel_shuffle(const Var<S>& a, Index factor) {
  return make_op<S>(pixel_shuffle(a.value(), factor), {a}, [factor](Node<S>& n) {
    n.parent(0).accumulate(pixel_unshuffle(n.grad, factor));
  });
}

template <typename S>
Var<S> take_phase(const Var<S>& a, int axis, int phase) {
  const AxisView v = axis_view(a.shape(), axis);
  if (v.extent % 2 != 0) {
    throw ShapeError("take_phase: extent along axis " + std::to_string(axis) + " of " + shape_str(a.shape()) +
                     " is odd");
  }
  if (phase != 0 && phase != 1) throw ShapeError("take_phase: phase must be 0 or 1");
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(axis)] /= 2;
  const Index half = v.extent / 2;
  Tensor<S> out(shape);
  for (Index o = 0; o < v.outer; ++o)
    for (Index n = 0; n < half; ++n)
      std::copy_n(a.value().data() + (o * v.extent + 2 * n + phase) * v.inner, v.inner,
                  out.data() + (o * half + n) * v.inner);
  return make_op<S>(std::move(out), {a}, [v, half, phase](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    for (Index o = 0; o < v.outer; ++o)
      for (Index k = 0; k < half; ++k)
        std::copy_n(n.grad.data() + (o * half + k) * v.inner, v.inner,
                    g.data() + (o * v.extent + 2 * k + phase) * v.inner);
    p.accumulate(g);
  });
}

template <typename S>
Var<S> interleave(const Var<S>& even, const Var<S>& odd, int axis) {
  require_same_shape(even.shape(), odd.shape(), "interleave");
  const AxisView v = axis_view(even.shape(), axis);
  Shape shape = even.shape();
  shape[static_cast<std::size_t>(axis)] *= 2;
  const Index full = v.extent * 2;
  Tensor<S> out(shape);
  for (Index o = 0; o < v.outer; ++o)
    for (Index n = 0; n < v.extent; ++n) {
      std::copy_n(even.value().data() + (o * v.extent + n) * v.inner, v.inner,
                  out.data() + (o * full + 2 * n) * v.inner);
      std::copy_n(odd.value().data() + (o * v.extent + n) * v.inner, v.inner,
                  out.data() + (o * full + 2 * n + 1) * v.inner);
    }
  return make_op<S>(std::move(out), {even, odd}, [v, full](Node<S>& n) {
    for (int phase = 0; phase < 2; ++phase) {
      Node<S>& p = n.parent(static_cast<std::size_t>(phase));
      if (!p.requires_grad) continue;
      Tensor<S> g(p.value.shape());
      for (Index o = 0; o < v.outer; ++o)
        for (Index k = 0; k < v.extent; ++k)
          std::copy_n(n.grad.data() + (o * full + 2 * k + phase) * v.inner, v.inner,
                      g.data() + (o * v.extent + k) * v.inner);
      p.accumulate(g);
    }
  });
}

template <typename S>
Var<S> lift(const Var<S>& target, const Var<S>& source, const Var<S>& taps, int axis, Neighbor neighbor,
            S sign) {
  require_same_shape(target.shape(), source.shape(), "lift");
  if (taps.value().size() != 2) throw ShapeError("lift: expected 2 taps, got " + shape_str(taps.shape()));
  auto shifted = std::make_shared<Tensor<S>>(shift_gather(source.value(), axis, neighbor));
  // Taps run in increasing sample order: (n, n+1) for Next, (n-1, n) for Previous.
  const bool previous = neighbor == Neighbor::Previous;
  const S t0 = taps.value()[previous ? 1 : 0], t1 = taps.value()[previous ? 0 : 1];
  Tensor<S> out(target.shape(), target.value().array() +
                                    sign * (t0 * source.value().array() + t1 * shifted->array()));
  return make_op<S>(std::move(out), {target, source, taps}, [shifted, axis, neighbor, sign, t0, t1, previous](Node<S>& n) {
    Node<S>& pt = n.parent(0);
    Node<S>& ps = n.parent(1);
    Node<S>& pk = n.parent(2);
    pt.accumulate(n.grad);
    if (ps.requires_grad) {
      Tensor<S> g = shift_scatter(n.grad, axis, neighbor);
      g.array() = sign * (t0 * n.grad.array() + t1 * g.array());
      ps.accumulate(g);
    }
    if (pk.requires_grad) {
      Tensor<S> g(pk.value.shape());
      g[previous ? 1 : 0] = sign * (n.grad.array() * ps.value.array()).sum();
      g[previous ? 0 : 1] = sign * (n.grad.array() * shifted->array()).sum();
      pk.accumulate(g);
    }
  });
}

template <typename S>
Var<S> pad_to_even(const Var<S>& a) {
  require_rank(a.shape(), 3, "pad_to_even");
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  if (h < 1 || w < 1) throw ShapeError("pad_to_even: empty image " + shape_str(a.shape()));
  const Index ph = h + (h % 2), pw = w + (w % 2);
  if (ph == h && pw == w) return a;
  // Reflection about the last sample; a single row/column is replicated.
  auto src_y = [h](Index y) { return y < h ? y : std::max<Index>(h - 2, 0); };
  auto src_x = [w](Index x) { return x < w ? x : std::max<Index>(w - 2, 0); };
  Tensor<S> out({ph, pw, c});
  for (Index y = 0; y < ph; ++y)
    for (Index x = 0; x < pw; ++x)
      for (Index k = 0; k < c; ++k) out(y, x, k) = a.value()(src_y(y), src_x(x), k);
  return make_op<S>(std::move(out), {a}, [ph, pw, c, src_y, src_x](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    for (Index y = 0; y < ph; ++y)
      for (Index x = 0; x < pw; ++x)
        for (Index k = 0; k < c; ++k) g(src_y(y), src_x(x), k) += n.grad(y, x, k);
    p.accumulate(g);
  });
}

template <typename S>
Var<S> crop(const Var<S>& a, Index height, Index width) {
  require_rank(a.shape(), 3, "crop");
  const Index h = a.shape()[0], w = a.shape()[1], c = a.shape()[2];
  if (height > h || width > w || height < 0 || width < 0) {
    throw ShapeError("crop: " + std::to_string(height) + "x" + std::to_string(width) + " exceeds " +
                     shape_str(a.shape()));
  }
  if (height == h && width == w) return a;
  Tensor<S> out({height, width, c});
  for (Index y = 0; y < height; ++y)
    std::copy_n(a.value().data() + y * w * c, width * c, out.data() + y * width * c);
  return make_op<S>(std::move(out), {a}, [w, c, height, width](Node<S>& n) {
    Node<S>& p = n.parent(0);
    Tensor<S> g(p.value.shape());
    for (Index y = 0; y < height; ++y)
      std::copy_n(n.grad.data() + y * width * c, width * c, g.data() + y * w * c);
    p.accumulate(g);
  });
}

#define DTP_INSTANTIATE_OPS(S)                                                                            \
  template Var<S> add(const Var<S>&, const Var<S>&);                                                      \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                                      \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                                      \
  template Var<S> div(const Var<S>&, const Var<S>&);                                                      \
  template Var<S> scale(const Var<S>&, S);                                                                \
  template Var<S> add_scalar(const Var<S>&, S);                                                           \
  template Var<S> pow(const Var<S>&, const Var<S>&);                                                      \
  template Var<S> exp(const Var<S>&);                                                                     \
  template Var<S> log(const Var<S>&);                                                                     \
  template Var<S> sqrt(const Var<S>&);                                                                    \
  template Var<S> sigmoid(const Var<S>&);                                                                 \
  template Var<S> softplus(const Var<S>&);                                                                \
  template Var<S> leaky_relu(const Var<S>&, S);                                                           \
  template Var<S> abs(const Var<S>&);                                                                     \
  template Var<S> clamp(const Var<S>&, S, S);                                                             \
  template Var<S> saturating_ratio(const Var<S>&, const Var<S>&);                                         \
  template Var<S> sum(const Var<S>&);                                                                     \
  template Var<S> mean(const Var<S>&);                                                                    \
  template Var<S> spatial_mean(const Var<S>&);                                                            \
  template Var<S> channel_mean(const Var<S>&);                                                            \
  template Var<S> channel_max(const Var<S>&);                                                             \
  template Var<S> softmax(const Var<S>&);                                                                 \
  template Var<S> element(const Var<S>&, Index);                                                          \
  template Var<S> reshape(const Var<S>&, Shape);                                                          \
  template Var<S> concat_channels(const std::vector<Var<S>>&);                                            \
  template Var<S> slice_channels(const Var<S>&, Index, Index);                                            \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, Index, Padding);                                   \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&);                                    \
  template Var<S> pixel_shuffle(const Var<S>&, Index);                                                    \
  template Var<S> take_phase(const Var<S>&, int, int);                                                    \
  template Var<S> interleave(const Var<S>&, const Var<S>&, int);                                          \
  template Var<S> lift(const Var<S>&, const Var<S>&, const Var<S>&, int, Neighbor, S);                    \
  template Var<S> pad_to_even(const Var<S>&);                                                             \
  template Var<S> crop(const Var<S>&, Index, Index);

DTP_INSTANTIATE_OPS(float)
DTP_INSTANTIATE_OPS(double)

}  // namespace dtp
