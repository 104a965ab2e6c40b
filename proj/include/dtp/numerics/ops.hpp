#pragma once

// Differentiable ops over Var. Binary elementwise ops broadcast with
// right-aligned (numpy) rules, so a {C} bias or a {1,1,C} channel mask
// combine with an H x W x C map, and a rank-0 scalar combines with anything.

#include "dtp/numerics/autodiff.hpp"
#include "dtp/numerics/kernels.hpp"

#include <vector>

namespace dtp {

Shape broadcast_shape(const Shape& a, const Shape& b);

template <typename S> Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> mul(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> div(const Var<S>& a, const Var<S>& b);

template <typename S> Var<S> scale(const Var<S>& a, S factor);
template <typename S> Var<S> add_scalar(const Var<S>& a, S offset);

/// base^exponent for base >= 0 and a rank-0 exponent; 0^p is 0 with zero gradient.
template <typename S> Var<S> pow(const Var<S>& base, const Var<S>& exponent);

template <typename S> Var<S> exp(const Var<S>& a);
template <typename S> Var<S> log(const Var<S>& a);
template <typename S> Var<S> sqrt(const Var<S>& a);
template <typename S> Var<S> sigmoid(const Var<S>& a);
/// log(1 + e^x), computed stably.
template <typename S> Var<S> softplus(const Var<S>& a);
template <typename S> Var<S> leaky_relu(const Var<S>& a, S negative_slope);
template <typename S> Var<S> abs(const Var<S>& a);
/// Gradient passes for lo <= x <= hi (ties included) and is zero outside.
template <typename S> Var<S> clamp(const Var<S>& a, S lo, S hi);

/// r = num / (num + offset), with r = 0 wherever num + offset == 0. `offset` is rank 0.
template <typename S> Var<S> saturating_ratio(const Var<S>& num, const Var<S>& offset);

template <typename S> Var<S> sum(const Var<S>& a);
template <typename S> Var<S> mean(const Var<S>& a);
/// H x W x C -> 1 x 1 x C average over pixels.
template <typename S> Var<S> spatial_mean(const Var<S>& a);
/// H x W x C -> H x W x 1 average over channels.
template <typename S> Var<S> channel_mean(const Var<S>& a);
/// H x W x C -> H x W x 1 maximum over channels; ties go to the lowest channel.
template <typename S> Var<S> channel_max(const Var<S>& a);
/// Softmax over a rank-1 vector.
template <typename S> Var<S> softmax(const Var<S>& a);
/// Rank-0 view of one element of a rank-1 vector.
template <typename S> Var<S> element(const Var<S>& a, Index i);
template <typename S> Var<S> reshape(const Var<S>& a, Shape shape);

template <typename S> Var<S> concat_channels(const std::vector<Var<S>>& parts);
template <typename S> Var<S> slice_channels(const Var<S>& a, Index begin, Index count);

template <typename S> Var<S> conv2d(const Var<S>& input, const Var<S>& kernel, Index stride = 1,
                                    Padding padding = Padding::Same);
/// conv2d followed by a per-output-channel bias.
template <typename S> Var<S> conv2d(const Var<S>& input, const Var<S>& kernel, const Var<S>& bias);

template <typename S> Var<S> pixel_shuffle(const Var<S>& a, Index factor);

// Lifting-scheme building blocks. `axis` is 0 for rows (vertical), 1 for columns.

/// Every second sample along `axis`, starting at `phase` (0 even, 1 odd).
template <typename S> Var<S> take_phase(const Var<S>& a, int axis, int phase);
/// Inverse of take_phase: out[2n] = even[n], out[2n+1] = odd[n].
template <typename S> Var<S> interleave(const Var<S>& even, const Var<S>& odd, int axis);

enum class Neighbor { Next, Previous };
/// out = target + sign * (taps . two consecutive source samples), with taps in
/// increasing sample order: source[n], source[n+1] for Next and
/// source[n-1], source[n] for Previous. Edge samples are replicated.
template <typename S> Var<S> lift(const Var<S>& target, const Var<S>& source, const Var<S>& taps, int axis,
                                  Neighbor neighbor, S sign);

/// Reflect-pads one trailing row/column when height/width is odd.
template <typename S> Var<S> pad_to_even(const Var<S>& a);
/// Top-left crop of a rank-3 tensor.
template <typename S> Var<S> crop(const Var<S>& a, Index height, Index width);

template <typename S> Var<S> operator+(const Var<S>& a, const Var<S>& b) { return add(a, b); }
template <typename S> Var<S> operator-(const Var<S>& a, const Var<S>& b) { return sub(a, b); }
template <typename S> Var<S> operator*(const Var<S>& a, const Var<S>& b) { return mul(a, b); }
template <typename S> Var<S> operator/(const Var<S>& a, const Var<S>& b) { return div(a, b); }
template <typename S> Var<S> operator*(const Var<S>& a, S c) { return scale(a, c); }
template <typename S> Var<S> operator*(S c, const Var<S>& a) { return scale(a, c); }
template <typename S> Var<S> operator+(const Var<S>& a, S c) { return add_scalar(a, c); }
template <typename S> Var<S> operator-(const Var<S>& a) { return scale(a, S(-1)); }

}  // namespace dtp
