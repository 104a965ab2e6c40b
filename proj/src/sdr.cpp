#include "dtp/sdr.hpp"

#include "dtp/init.hpp"

#include <cmath>
#include <stdexcept>

namespace dtp::sdr {

template <typename Scalar>
Var<Scalar> naka_rushton_response(const Var<Scalar>& luminance, const NakaRushtonParams<Scalar>& p) {
  const Var<Scalar> x = clamp(luminance, Scalar(0), Scalar(1));
  const Var<Scalar> num = pow(x, p.gamma);
  const Var<Scalar> offset = pow(p.sigma, p.gamma) + p.beta;
  return saturating_ratio(num, offset);
}

template <typename Scalar>
Var<Scalar> naka_rushton(const Var<Scalar>& luminance, const NakaRushtonParams<Scalar>& p) {
  if (luminance.shape().size() != 3) {
    throw ShapeError("naka_rushton: expected H x W x C input, got " + shape_str(luminance.shape()));
  }
  const Var<Scalar> x = clamp(luminance, Scalar(0), Scalar(1));
  const Var<Scalar> r = saturating_ratio(pow(x, p.gamma), pow(p.sigma, p.gamma) + p.beta);
  const Var<Scalar> mu_in = spatial_mean(x);
  const Var<Scalar> mu_out = spatial_mean(r);
  const Var<Scalar> gain = mu_in / add_scalar(mu_out, static_cast<Scalar>(kNakaRushtonEpsilon));
  return clamp(r * gain, Scalar(0), Scalar(1));
}

template <typename Scalar>
Var<Scalar> denoise_stages(const Var<Scalar>& texture, const ResidualStack<Scalar>& stack, Index first, Index last) {
  if (first < 0 || last > stack.stages() || first > last) throw std::out_of_range("denoise_stages: bad stage range");
  Var<Scalar> t = texture;
  for (Index i = first; i < last; ++i) {
    const auto& u = stack.units[static_cast<std::size_t>(i)];
    const Var<Scalar> hidden = leaky_relu(conv2d(t, u.w1, u.b1), static_cast<Scalar>(kLeakySlope));
    t = t + conv2d(hidden, u.w2, u.b2);
  }
  return t;
}

template <typename Scalar>
Var<Scalar> denoise(const Var<Scalar>& texture, const ResidualStack<Scalar>& stack) {
  if (stack.stages() < 1) throw std::invalid_argument("denoise: residual stack needs at least one stage");
  if (texture.shape().size() != 3 || texture.shape()[2] != stack.units[0].w1.shape()[2]) {
    throw ShapeError("denoise: texture " + shape_str(texture.shape()) + " does not match stage kernel " +
                     shape_str(stack.units[0].w1.shape()));
  }
  return denoise_stages(texture, stack, 0, stack.stages());
}

template <typename Scalar>
ResidualStack<Scalar> zero_stack(Index channels, Index width, Index stages) {
  ResidualStack<Scalar> s;
  for (Index i = 0; i < stages; ++i) {
    s.units.push_back({constant(Tensor<Scalar>({3, 3, channels, width})), constant(Tensor<Scalar>({width})),
                       constant(Tensor<Scalar>({3, 3, width, channels})), constant(Tensor<Scalar>({channels}))});
  }
  return s;
}

std::string stage_prefix(Index stage) { return "sdr.stage" + std::to_string(stage) + "."; }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::invalid_argument("softplus_inverse: argument must be positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

template <typename Scalar>
void add_params(ParamStore<Scalar>& store, const SdrConfig& cfg, Index texture_channels, std::mt19937_64& rng) {
  if (cfg.stages < 1) throw std::invalid_argument("sdr.stages must be >= 1");
  if (cfg.width < 1) throw std::invalid_argument("sdr.width must be >= 1");
  if (!(cfg.gamma_init > 0.0)) throw std::invalid_argument("sdr.gamma_init must be positive");
  store.add(kGammaRaw, Tensor<Scalar>::scalar(static_cast<Scalar>(std::log(cfg.gamma_init))));
  store.add(kSigmaRaw, Tensor<Scalar>::scalar(static_cast<Scalar>(softplus_inverse(cfg.sigma_init))));
  store.add(kBetaRaw, Tensor<Scalar>::scalar(static_cast<Scalar>(softplus_inverse(cfg.beta_init))));
  const Index c = texture_channels, w = cfg.width;
  for (Index i = 0; i < cfg.stages; ++i) {
    const std::string p = stage_prefix(i);
    store.add(p + "w1", init::normal<Scalar>({3, 3, c, w}, std::sqrt(1.0 / (9.0 * c)), rng));
    store.add(p + "b1", Tensor<Scalar>({w}));
    store.add(p + "w2", Tensor<Scalar>({3, 3, w, c}));
    store.add(p + "b2", Tensor<Scalar>({c}));
  }
}

template <typename Scalar>
NakaRushtonParams<Scalar> bind_naka_rushton(Graph<Scalar>& g) {
  return {exp(g.param(kGammaRaw)), softplus(g.param(kSigmaRaw)), softplus(g.param(kBetaRaw))};
}

template <typename Scalar>
ResidualStack<Scalar> bind_stack(Graph<Scalar>& g, const SdrConfig& cfg) {
  ResidualStack<Scalar> s;
  for (Index i = 0; i < cfg.stages; ++i) {
    const std::string p = stage_prefix(i);
    s.units.push_back({g.param(p + "w1"), g.param(p + "b1"), g.param(p + "w2"), g.param(p + "b2")});
  }
  return s;
}

#define DTP_INSTANTIATE_SDR(S)                                                                       \
  template Var<S> naka_rushton(const Var<S>&, const NakaRushtonParams<S>&);                          \
  template Var<S> naka_rushton_response(const Var<S>&, const NakaRushtonParams<S>&);                 \
  template Var<S> denoise(const Var<S>&, const ResidualStack<S>&);                                   \
  template Var<S> denoise_stages(const Var<S>&, const ResidualStack<S>&, Index, Index);              \
  template ResidualStack<S> zero_stack(Index, Index, Index);                                         \
  template void add_params(ParamStore<S>&, const SdrConfig&, Index, std::mt19937_64&);               \
  template NakaRushtonParams<S> bind_naka_rushton(Graph<S>&);                                        \
  template ResidualStack<S> bind_stack(Graph<S>&, const SdrConfig&);

DTP_INSTANTIATE_SDR(float)
DTP_INSTANTIATE_SDR(double)

}  // namespace dtp::sdr
