#pragma once

// Frequency-aware structural decoupling: a learnable one-level lifting
// wavelet, simplex-constrained subband reweighting, a Gaussian-moment KL
// compactness term on the LL band, and the luminance/texture branch split.
//
// Lifting convention per axis (horizontal first, then vertical):
//   d[n] = odd[n]  - (p0 * even[n] + p1 * even[n+1])
//   s[n] = even[n] + (u0 * d[n-1]  + u1 * d[n])
// with edge samples replicated. Haar taps p = (1, 0), u = (0, 1/2) make s the
// pairwise mean, so a constant image has LL equal to that constant.
//
// Subband naming: the first letter is the horizontal filter, the second the
// vertical one. LH = horizontal low / vertical high, HL = horizontal high /
// vertical low.

#include "dtp/numerics/ops.hpp"

#include <array>
#include <string>

namespace dtp::fsd {

template <typename Scalar>
struct LiftingParams {
  Var<Scalar> predict_h, update_h, predict_v, update_v;

  static Tensor<Scalar> haar_predict() { return Tensor<Scalar>({2}, {Scalar(1), Scalar(0)}); }
  static Tensor<Scalar> haar_update() { return Tensor<Scalar>({2}, {Scalar(0), Scalar(0.5)}); }
  /// Constant (non-learnable) Haar taps.
  static LiftingParams haar();
};

template <typename Scalar>
struct SubbandSet {
  Var<Scalar> ll, lh, hl, hh;
  /// Size of the image before reflect padding to even extents.
  Index height = 0, width = 0;
};

/// Unconstrained logits (LL, LH, HL, HH); the effective weights are their softmax.
template <typename Scalar>
struct SubbandWeights {
  Var<Scalar> logits;
  Var<Scalar> effective() const { return softmax(logits); }
};

struct KLPrior {
  double mu0 = 0.35;
  double sigma0 = 0.25;
};

template <typename Scalar>
struct Branches {
  Var<Scalar> luminance;  // H/2 x W/2 x C
  Var<Scalar> texture;    // H/2 x W/2 x 3C, channel blocks LH | HL | HH
};

template <typename Scalar>
SubbandSet<Scalar> decompose(const Var<Scalar>& image, const LiftingParams<Scalar>& theta);

template <typename Scalar>
Var<Scalar> reconstruct(const SubbandSet<Scalar>& subbands, const LiftingParams<Scalar>& theta);

template <typename Scalar>
SubbandSet<Scalar> reweight(const SubbandSet<Scalar>& subbands, const SubbandWeights<Scalar>& alpha);

/// KL( N(mu, s^2) || N(mu0, sigma0^2) ) from the empirical mean and population
/// standard deviation of `ll`. s is evaluated as sqrt(var + 1e-12), which
/// keeps the log finite for a constant band.
template <typename Scalar>
Var<Scalar> kl_loss(const Var<Scalar>& ll, const KLPrior& prior);

template <typename Scalar>
Branches<Scalar> split(const SubbandSet<Scalar>& reweighted);

// Parameter registration under the "fsd." prefix.
inline const std::string kPredictH = "fsd.theta.predict_h";
inline const std::string kUpdateH = "fsd.theta.update_h";
inline const std::string kPredictV = "fsd.theta.predict_v";
inline const std::string kUpdateV = "fsd.theta.update_v";
inline const std::string kAlphaLogits = "fsd.alpha.logits";

template <typename Scalar>
void add_params(ParamStore<Scalar>& store);

template <typename Scalar>
LiftingParams<Scalar> bind_lifting(Graph<Scalar>& graph);

template <typename Scalar>
SubbandWeights<Scalar> bind_weights(Graph<Scalar>& graph);

}  // namespace dtp::fsd
