#include "dtp/csr.hpp"

#include "dtp/init.hpp"
#include "dtp/sdr.hpp"

#include <cmath>
#include <stdexcept>

namespace dtp::csr {

namespace {

template <typename Scalar>
constexpr Scalar leaky_slope() {
  return static_cast<Scalar>(sdr::kLeakySlope);
}

}  // namespace

template <typename Scalar>
Projected<Scalar> project(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p) {
  if (luminance.shape().size() != 3 || texture.shape().size() != 3 || luminance.shape()[0] != texture.shape()[0] ||
      luminance.shape()[1] != texture.shape()[1]) {
    throw ShapeError("fusion: spatial mismatch between luminance " + shape_str(luminance.shape()) + " and texture " +
                     shape_str(texture.shape()));
  }
  Projected<Scalar> x;
  x.luminance = conv2d(luminance, p.lum_w, p.lum_b);
  x.texture = conv2d(texture, p.tex_w, p.tex_b);
  x.joint = concat_channels<Scalar>({x.luminance, x.texture});
  x.features = conv2d(x.joint, p.mix_w, p.mix_b);
  return x;
}

template <typename Scalar>
Var<Scalar> channel_attention(const Projected<Scalar>& x, const FusionParams<Scalar>& p) {
  const Var<Scalar> descriptor = spatial_mean(x.features);
  const Var<Scalar> hidden = leaky_relu(conv2d(descriptor, p.ca_w1, p.ca_b1), leaky_slope<Scalar>());
  const Var<Scalar> mask = sigmoid(conv2d(hidden, p.ca_w2, p.ca_b2));
  return x.features * mask;
}

template <typename Scalar>
Var<Scalar> channel_attention(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p) {
  return channel_attention(project(luminance, texture, p), p);
}

template <typename Scalar>
Var<Scalar> spatial_attention(const Projected<Scalar>& x, const FusionParams<Scalar>& p) {
  const Var<Scalar> pooled = concat_channels<Scalar>({channel_mean(x.features), channel_max(x.features)});
  const Var<Scalar> mask = sigmoid(conv2d(pooled, p.sa_w, p.sa_b));
  return x.features * mask;
}

template <typename Scalar>
Var<Scalar> spatial_attention(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p) {
  return spatial_attention(project(luminance, texture, p), p);
}

template <typename Scalar>
Var<Scalar> gate(const Projected<Scalar>& x, const FusionParams<Scalar>& p) {
  return sigmoid(conv2d(spatial_mean(x.joint), p.gate_w, p.gate_b));
}

template <typename Scalar>
Var<Scalar> gated_fuse(const Projected<Scalar>& x, const FusionParams<Scalar>& p) {
  const Var<Scalar> g = gate(x, p);
  const Var<Scalar> complement = add_scalar(-g, Scalar(1));
  return g * channel_attention(x, p) + complement * spatial_attention(x, p);
}

template <typename Scalar>
Var<Scalar> gated_fuse(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p) {
  return gated_fuse(project(luminance, texture, p), p);
}

bool supported_upsample_factor(Index factor) { return factor == 2 || factor == 4 || factor == 8; }

template <typename Scalar>
Var<Scalar> rebuild_upsample(const Var<Scalar>& fused, const Var<Scalar>& texture_residual,
                             const DecoderParams<Scalar>& p, Index factor) {
  if (!supported_upsample_factor(factor)) {
    throw std::invalid_argument("rebuild_upsample: unsupported upsampling factor " + std::to_string(factor));
  }
  require_same_shape(fused.shape(), texture_residual.shape(), "rebuild_upsample");
  const Var<Scalar> mixed = conv2d(fused + texture_residual, p.mix_w, p.mix_b);
  const Var<Scalar> hidden = leaky_relu(conv2d(mixed, p.refine_w1, p.refine_b1), leaky_slope<Scalar>());
  const Var<Scalar> refined = mixed + conv2d(hidden, p.refine_w2, p.refine_b2);
  const Var<Scalar> expanded = conv2d(refined, p.expand_w, p.expand_b);
  const Var<Scalar> up = pixel_shuffle(expanded, factor);
  return clamp(conv2d(up, p.out_w, p.out_b), Scalar(0), Scalar(1));
}

std::vector<std::string> attention_param_names() {
  std::vector<std::string> names;
  for (const char* n : {"ca_w1", "ca_b1", "ca_w2", "ca_b2", "sa_w", "sa_b", "gate_w", "gate_b"})
    names.push_back(kFusionPrefix + n);
  return names;
}

template <typename Scalar>
void add_params(ParamStore<Scalar>& store, const CsrConfig& cfg, Index image_channels, Index decoder_factor,
                std::mt19937_64& rng) {
  if (cfg.width < 1) throw std::invalid_argument("csr.width must be >= 1");
  if (cfg.spatial_kernel < 1 || cfg.spatial_kernel % 2 == 0) {
    throw std::invalid_argument("csr.spatial_kernel must be a positive odd integer");
  }
  if (cfg.reduction < 1) throw std::invalid_argument("csr.reduction must be >= 1");
  if (!supported_upsample_factor(decoder_factor)) {
    throw std::invalid_argument("unsupported decoder upsampling factor " + std::to_string(decoder_factor));
  }
  const Index c = image_channels, f = cfg.width, k = cfg.spatial_kernel;
  const Index hidden = std::max<Index>(1, f / cfg.reduction);
  const Index rr = decoder_factor * decoder_factor;
  auto he = [](double fan_in) { return std::sqrt(1.0 / fan_in); };

  const std::string fp = kFusionPrefix;
  store.add(fp + "lum_w", init::normal<Scalar>({1, 1, c, f}, he(c), rng));
  store.add(fp + "lum_b", Tensor<Scalar>({f}));
  store.add(fp + "tex_w", init::normal<Scalar>({1, 1, 3 * c, f}, he(3 * c), rng));
  store.add(fp + "tex_b", Tensor<Scalar>({f}));
  store.add(fp + "mix_w", init::normal<Scalar>({1, 1, 2 * f, f}, he(2 * f), rng));
  store.add(fp + "mix_b", Tensor<Scalar>({f}));
  store.add(fp + "ca_w1", init::normal<Scalar>({1, 1, f, hidden}, he(f), rng));
  store.add(fp + "ca_b1", Tensor<Scalar>({hidden}));
  store.add(fp + "ca_w2", init::normal<Scalar>({1, 1, hidden, f}, he(hidden), rng));
  store.add(fp + "ca_b2", Tensor<Scalar>({f}));
  store.add(fp + "sa_w", init::normal<Scalar>({k, k, 2, 1}, he(2 * k * k), rng));
  store.add(fp + "sa_b", Tensor<Scalar>({1}));
  store.add(fp + "gate_w", init::normal<Scalar>({1, 1, 2 * f, 1}, he(2 * f), rng));
  store.add(fp + "gate_b", Tensor<Scalar>({1}));

  const std::string dp = kDecoderPrefix;
  store.add(dp + "mix_w", init::normal<Scalar>({3, 3, f, f}, he(9 * f), rng));
  store.add(dp + "mix_b", Tensor<Scalar>({f}));
  store.add(dp + "refine_w1", init::normal<Scalar>({3, 3, f, f}, he(9 * f), rng));
  store.add(dp + "refine_b1", Tensor<Scalar>({f}));
  store.add(dp + "refine_w2", Tensor<Scalar>({3, 3, f, f}));
  store.add(dp + "refine_b2", Tensor<Scalar>({f}));
  store.add(dp + "expand_w", init::normal<Scalar>({3, 3, f, f * rr}, he(9 * f), rng));
  store.add(dp + "expand_b", Tensor<Scalar>({f * rr}));
  store.add(dp + "out_w", init::normal<Scalar>({3, 3, f, c}, he(9 * f), rng));
  store.add(dp + "out_b", Tensor<Scalar>({c}));
}

template <typename Scalar>
FusionParams<Scalar> bind_fusion(Graph<Scalar>& g) {
  const std::string fp = kFusionPrefix;
  return {g.param(fp + "lum_w"), g.param(fp + "lum_b"), g.param(fp + "tex_w"), g.param(fp + "tex_b"),
          g.param(fp + "mix_w"), g.param(fp + "mix_b"), g.param(fp + "ca_w1"), g.param(fp + "ca_b1"),
          g.param(fp + "ca_w2"), g.param(fp + "ca_b2"), g.param(fp + "sa_w"),  g.param(fp + "sa_b"),
          g.param(fp + "gate_w"), g.param(fp + "gate_b")};
}

template <typename Scalar>
DecoderParams<Scalar> bind_decoder(Graph<Scalar>& g) {
  const std::string dp = kDecoderPrefix;
  return {g.param(dp + "mix_w"),     g.param(dp + "mix_b"),     g.param(dp + "refine_w1"), g.param(dp + "refine_b1"),
          g.param(dp + "refine_w2"), g.param(dp + "refine_b2"), g.param(dp + "expand_w"),  g.param(dp + "expand_b"),
          g.param(dp + "out_w"),     g.param(dp + "out_b")};
}

#define DTP_INSTANTIATE_CSR(S)                                                                         \
  template Projected<S> project(const Var<S>&, const Var<S>&, const FusionParams<S>&);                 \
  template Var<S> channel_attention(const Projected<S>&, const FusionParams<S>&);                      \
  template Var<S> channel_attention(const Var<S>&, const Var<S>&, const FusionParams<S>&);             \
  template Var<S> spatial_attention(const Projected<S>&, const FusionParams<S>&);                      \
  template Var<S> spatial_attention(const Var<S>&, const Var<S>&, const FusionParams<S>&);             \
  template Var<S> gate(const Projected<S>&, const FusionParams<S>&);                                   \
  template Var<S> gated_fuse(const Projected<S>&, const FusionParams<S>&);                             \
  template Var<S> gated_fuse(const Var<S>&, const Var<S>&, const FusionParams<S>&);                    \
  template Var<S> rebuild_upsample(const Var<S>&, const Var<S>&, const DecoderParams<S>&, Index);      \
  template void add_params(ParamStore<S>&, const CsrConfig&, Index, Index, std::mt19937_64&);          \
  template FusionParams<S> bind_fusion(Graph<S>&);                                                     \
  template DecoderParams<S> bind_decoder(Graph<S>&);

DTP_INSTANTIATE_CSR(float)
DTP_INSTANTIATE_CSR(double)

}  // namespace dtp::csr
