#include "dtp/fsd.hpp"

#include <stdexcept>

namespace dtp::fsd {

template <typename Scalar>
LiftingParams<Scalar> LiftingParams<Scalar>::haar() {
  return {constant(haar_predict()), constant(haar_update()), constant(haar_predict()), constant(haar_update())};
}

namespace {

template <typename Scalar>
struct Pair {
  Var<Scalar> low, high;
};

template <typename Scalar>
Pair<Scalar> analyze(const Var<Scalar>& x, const Var<Scalar>& predict, const Var<Scalar>& update, int axis) {
  const Var<Scalar> even = take_phase(x, axis, 0);
  const Var<Scalar> odd = take_phase(x, axis, 1);
  const Var<Scalar> detail = lift(odd, even, predict, axis, Neighbor::Next, Scalar(-1));
  const Var<Scalar> smooth = lift(even, detail, update, axis, Neighbor::Previous, Scalar(1));
  return {smooth, detail};
}

template <typename Scalar>
Var<Scalar> synthesize(const Var<Scalar>& low, const Var<Scalar>& high, const Var<Scalar>& predict,
                       const Var<Scalar>& update, int axis) {
  const Var<Scalar> even = lift(low, high, update, axis, Neighbor::Previous, Scalar(-1));
  const Var<Scalar> odd = lift(high, even, predict, axis, Neighbor::Next, Scalar(1));
  return interleave(even, odd, axis);
}

}  // namespace

template <typename Scalar>
SubbandSet<Scalar> decompose(const Var<Scalar>& image, const LiftingParams<Scalar>& theta) {
  if (image.shape().size() != 3) throw ShapeError("decompose: expected H x W x C image, got " + shape_str(image.shape()));
  if (image.value().size() == 0) throw ShapeError("decompose: empty image " + shape_str(image.shape()));
  const Var<Scalar> x = pad_to_even(image);
  const auto horizontal = analyze(x, theta.predict_h, theta.update_h, 1);
  const auto low = analyze(horizontal.low, theta.predict_v, theta.update_v, 0);
  const auto high = analyze(horizontal.high, theta.predict_v, theta.update_v, 0);
  return {low.low, low.high, high.low, high.high, image.shape()[0], image.shape()[1]};
}

template <typename Scalar>
Var<Scalar> reconstruct(const SubbandSet<Scalar>& sb, const LiftingParams<Scalar>& theta) {
  for (const auto* band : {&sb.lh, &sb.hl, &sb.hh}) require_same_shape(sb.ll.shape(), band->shape(), "reconstruct");
  if (sb.ll.shape().size() != 3) throw ShapeError("reconstruct: subbands must be rank 3");
  const Index padded_h = 2 * sb.ll.shape()[0], padded_w = 2 * sb.ll.shape()[1];
  const Index h = sb.height > 0 ? sb.height : padded_h;
  const Index w = sb.width > 0 ? sb.width : padded_w;
  if (h > padded_h || w > padded_w || h + 1 < padded_h || w + 1 < padded_w) {
    throw ShapeError("reconstruct: recorded size " + std::to_string(h) + "x" + std::to_string(w) +
                     " inconsistent with subbands " + shape_str(sb.ll.shape()));
  }
  const Var<Scalar> low = synthesize(sb.ll, sb.lh, theta.predict_v, theta.update_v, 0);
  const Var<Scalar> high = synthesize(sb.hl, sb.hh, theta.predict_v, theta.update_v, 0);
  const Var<Scalar> x = synthesize(low, high, theta.predict_h, theta.update_h, 1);
  return crop(x, h, w);
}

template <typename Scalar>
SubbandSet<Scalar> reweight(const SubbandSet<Scalar>& sb, const SubbandWeights<Scalar>& alpha) {
  if (alpha.logits.value().size() != 4) {
    throw ShapeError("reweight: expected 4 logits, got " + shape_str(alpha.logits.shape()));
  }
  const Var<Scalar> w = alpha.effective();
  return {sb.ll * element(w, 0), sb.lh * element(w, 1), sb.hl * element(w, 2), sb.hh * element(w, 3), sb.height,
          sb.width};
}

template <typename Scalar>
Var<Scalar> kl_loss(const Var<Scalar>& ll, const KLPrior& prior) {
  if (ll.value().size() < 2) throw ShapeError("kl_loss: LL needs at least 2 elements");
  if (!(prior.sigma0 > 0.0)) throw std::invalid_argument("kl_loss: sigma0 must be positive");
  const Scalar mu0 = static_cast<Scalar>(prior.mu0);
  const Scalar var0 = static_cast<Scalar>(prior.sigma0 * prior.sigma0);
  const Var<Scalar> mu = mean(ll);
  const Var<Scalar> centered = ll - mu;
  const Var<Scalar> var = add_scalar(mean(centered * centered), Scalar(1e-12));
  const Var<Scalar> s = sqrt(var);
  const Var<Scalar> dmu = add_scalar(mu, -mu0);
  const Var<Scalar> quad = scale(var + dmu * dmu, Scalar(0.5) / var0);
  return add_scalar(quad - log(s), static_cast<Scalar>(std::log(prior.sigma0)) - Scalar(0.5));
}

template <typename Scalar>
Branches<Scalar> split(const SubbandSet<Scalar>& sb) {
  return {sb.ll, concat_channels<Scalar>({sb.lh, sb.hl, sb.hh})};
}

template <typename Scalar>
void add_params(ParamStore<Scalar>& store) {
  store.add(kPredictH, LiftingParams<Scalar>::haar_predict());
  store.add(kUpdateH, LiftingParams<Scalar>::haar_update());
  store.add(kPredictV, LiftingParams<Scalar>::haar_predict());
  store.add(kUpdateV, LiftingParams<Scalar>::haar_update());
  store.add(kAlphaLogits, Tensor<Scalar>({4}));
}

template <typename Scalar>
LiftingParams<Scalar> bind_lifting(Graph<Scalar>& g) {
  return {g.param(kPredictH), g.param(kUpdateH), g.param(kPredictV), g.param(kUpdateV)};
}

template <typename Scalar>
SubbandWeights<Scalar> bind_weights(Graph<Scalar>& g) {
  return {g.param(kAlphaLogits)};
}

#define DTP_INSTANTIATE_FSD(S)                                                       \
  template struct LiftingParams<S>;                                                  \
  template SubbandSet<S> decompose(const Var<S>&, const LiftingParams<S>&);          \
  template Var<S> reconstruct(const SubbandSet<S>&, const LiftingParams<S>&);        \
  template SubbandSet<S> reweight(const SubbandSet<S>&, const SubbandWeights<S>&);   \
  template Var<S> kl_loss(const Var<S>&, const KLPrior&);                            \
  template Branches<S> split(const SubbandSet<S>&);                                  \
  template void add_params(ParamStore<S>&);                                          \
  template LiftingParams<S> bind_lifting(Graph<S>&);                                 \
  template SubbandWeights<S> bind_weights(Graph<S>&);

DTP_INSTANTIATE_FSD(float)
DTP_INSTANTIATE_FSD(double)

}  // namespace dtp::fsd
