#pragma once

// Semantics-specific dual-path representation: the Naka-Rushton luminance
// enhancer and the residual texture denoiser. Each acts on one branch only.

#include "dtp/numerics/ops.hpp"

#include <random>
#include <string>
#include <vector>

namespace dtp::sdr {

inline constexpr double kNakaRushtonEpsilon = 1e-6;
inline constexpr double kLeakySlope = 0.01;

/// Effective (constrained) parameters as rank-0 Vars: gamma > 0, sigma >= 0, beta >= 0.
template <typename Scalar>
struct NakaRushtonParams {
  Var<Scalar> gamma, sigma, beta;

  static NakaRushtonParams constants(Scalar gamma, Scalar sigma, Scalar beta) {
    return {constant_scalar(gamma), constant_scalar(sigma), constant_scalar(beta)};
  }
};

/// R(x) = conv3x3(leaky(conv3x3(x) + b1)) + b2
template <typename Scalar>
struct ResidualUnit {
  Var<Scalar> w1, b1, w2, b2;
};

template <typename Scalar>
struct ResidualStack {
  std::vector<ResidualUnit<Scalar>> units;
  Index stages() const { return static_cast<Index>(units.size()); }
};

struct SdrConfig {
  double gamma_init = 1.0;
  double sigma_init = 0.3;
  double beta_init = 0.05;
  int stages = 4;
  int width = 16;
};

/// Per channel c, with x clamped to [0, 1]:
///   r = x^gamma / (x^gamma + sigma^gamma + beta)
///   out = clamp(r * mean_c(x) / (mean_c(r) + eps), 0, 1)
/// A zero numerator with a zero denominator yields r = 0.
template <typename Scalar>
Var<Scalar> naka_rushton(const Var<Scalar>& luminance, const NakaRushtonParams<Scalar>& p);

/// Core response r(x) only (no renormalization, no clamp).
template <typename Scalar>
Var<Scalar> naka_rushton_response(const Var<Scalar>& luminance, const NakaRushtonParams<Scalar>& p);

/// T_i = T_{i-1} + R_i(T_{i-1}) for every stage.
template <typename Scalar>
Var<Scalar> denoise(const Var<Scalar>& texture, const ResidualStack<Scalar>& stack);

/// Runs stages [first, last) only.
template <typename Scalar>
Var<Scalar> denoise_stages(const Var<Scalar>& texture, const ResidualStack<Scalar>& stack, Index first, Index last);

/// A stack of `stages` units with all-zero weights (the identity map).
template <typename Scalar>
ResidualStack<Scalar> zero_stack(Index channels, Index width, Index stages);

// Parameter registration under "sdr.". Naka-Rushton parameters are stored
// unconstrained: gamma = exp(raw), sigma = softplus(raw), beta = softplus(raw).
inline const std::string kGammaRaw = "sdr.nr.gamma_raw";
inline const std::string kSigmaRaw = "sdr.nr.sigma_raw";
inline const std::string kBetaRaw = "sdr.nr.beta_raw";
std::string stage_prefix(Index stage);

/// Inverse of softplus, for initialization.
double softplus_inverse(double y);

/// First conv of each unit is drawn from N(0, 1/fan_in); the second is zero,
/// so a freshly initialized stack is the identity.
template <typename Scalar>
void add_params(ParamStore<Scalar>& store, const SdrConfig& cfg, Index texture_channels, std::mt19937_64& rng);

template <typename Scalar>
NakaRushtonParams<Scalar> bind_naka_rushton(Graph<Scalar>& graph);

template <typename Scalar>
ResidualStack<Scalar> bind_stack(Graph<Scalar>& graph, const SdrConfig& cfg);

}  // namespace dtp::sdr
