#pragma once

// Cross-frequency semantic recomposition: channel and spatial attention over
// the projected luminance/texture pair, a scalar sigmoid gate blending them,
// and the rebuild + channel-to-space decoder.

#include "dtp/numerics/ops.hpp"

#include <random>
#include <string>
#include <vector>

namespace dtp::csr {

struct CsrConfig {
  int width = 32;          // fusion width C_f
  int spatial_kernel = 7;  // k of the spatial-attention conv
  int reduction = 4;       // channel-attention bottleneck reduction
  int scale = 2;           // super-resolution factor s of the whole model
};

template <typename Scalar>
struct FusionParams {
  // Entry projections (1x1): luminance C -> C_f, texture 3C -> C_f.
  Var<Scalar> lum_w, lum_b, tex_w, tex_b;
  // Joint mixing (1x1): 2 C_f -> C_f.
  Var<Scalar> mix_w, mix_b;
  // Channel attention bottleneck C_f -> C_f / r -> C_f.
  Var<Scalar> ca_w1, ca_b1, ca_w2, ca_b2;
  // Spatial attention k x k conv over [mean, max] channel pools -> 1.
  Var<Scalar> sa_w, sa_b;
  // Gate: 2 C_f pooled descriptor -> 1.
  Var<Scalar> gate_w, gate_b;
};

template <typename Scalar>
struct DecoderParams {
  Var<Scalar> mix_w, mix_b;                                  // 3x3, C_f -> C_f
  Var<Scalar> refine_w1, refine_b1, refine_w2, refine_b2;    // residual block
  Var<Scalar> expand_w, expand_b;                            // 3x3, C_f -> C_f * r^2
  Var<Scalar> out_w, out_b;                                  // 3x3, C_f -> 3
};

/// Projected inputs shared by both attention branches and the gate.
template <typename Scalar>
struct Projected {
  Var<Scalar> luminance;  // H x W x C_f
  Var<Scalar> texture;    // H x W x C_f, also the decoder's residual path
  Var<Scalar> joint;      // concat(luminance, texture), H x W x 2 C_f
  Var<Scalar> features;   // 1x1 mix of joint, H x W x C_f
};

template <typename Scalar>
Projected<Scalar> project(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p);

/// features * sigmoid(bottleneck(spatial mean of features)), mask per channel.
template <typename Scalar>
Var<Scalar> channel_attention(const Projected<Scalar>& x, const FusionParams<Scalar>& p);
template <typename Scalar>
Var<Scalar> channel_attention(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p);

/// features * sigmoid(conv_k([channel mean, channel max])), mask per pixel.
template <typename Scalar>
Var<Scalar> spatial_attention(const Projected<Scalar>& x, const FusionParams<Scalar>& p);
template <typename Scalar>
Var<Scalar> spatial_attention(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p);

/// Scalar gate in (0, 1) from the pooled joint descriptor, shape 1 x 1 x 1.
template <typename Scalar>
Var<Scalar> gate(const Projected<Scalar>& x, const FusionParams<Scalar>& p);

/// G * channel_attention + (1 - G) * spatial_attention
template <typename Scalar>
Var<Scalar> gated_fuse(const Projected<Scalar>& x, const FusionParams<Scalar>& p);
template <typename Scalar>
Var<Scalar> gated_fuse(const Var<Scalar>& luminance, const Var<Scalar>& texture, const FusionParams<Scalar>& p);

/// Decoder upsampling factors accepted by rebuild_upsample.
bool supported_upsample_factor(Index factor);

/// clamp(out_conv(shuffle_r(expand(refine(mix(fused + texture_residual))))), 0, 1)
/// `texture_residual` is the projected texture (same shape as `fused`). The
/// output is factor x the input resolution with 3 channels.
template <typename Scalar>
Var<Scalar> rebuild_upsample(const Var<Scalar>& fused, const Var<Scalar>& texture_residual,
                             const DecoderParams<Scalar>& p, Index factor);

inline const std::string kFusionPrefix = "csr.fusion.";
inline const std::string kDecoderPrefix = "csr.decoder.";

/// Names of the attention and gate parameters (frozen when fusion is disabled).
std::vector<std::string> attention_param_names();

template <typename Scalar>
void add_params(ParamStore<Scalar>& store, const CsrConfig& cfg, Index image_channels, Index decoder_factor,
                std::mt19937_64& rng);

template <typename Scalar>
FusionParams<Scalar> bind_fusion(Graph<Scalar>& graph);

template <typename Scalar>
DecoderParams<Scalar> bind_decoder(Graph<Scalar>& graph);

}  // namespace dtp::csr
