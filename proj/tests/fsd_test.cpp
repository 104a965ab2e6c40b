#include "dtp/fsd.hpp"
#include "dtp/numerics/gradcheck.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dtp;
using namespace dtp::fsd;
using dtp::test::max_abs_diff;
using dtp::test::random_tensor;

namespace {

template <typename S>
LiftingParams<S> random_theta(std::mt19937_64& rng, double spread = 0.5) {
  auto perturbed = [&](Tensor<S> base) {
    base.array() += random_tensor<S>({2}, rng, -spread, spread).array();
    return constant(base);
  };
  using L = LiftingParams<S>;
  return {perturbed(L::haar_predict()), perturbed(L::haar_update()), perturbed(L::haar_predict()),
          perturbed(L::haar_update())};
}

/// Direct 2x2 block transform for [[a, b], [c, d]] under Haar taps.
struct Block {
  double ll, lh, hl, hh;
};
Block haar_block(double a, double b, double c, double d) {
  return {(a + b + c + d) / 4.0, (c + d) / 2.0 - (a + b) / 2.0, ((b - a) + (d - c)) / 2.0, (d - c) - (b - a)};
}

Tensor<double> two_point(double mu, double s, Index n = 2) {
  Tensor<double> t({n});
  for (Index i = 0; i < n; ++i) t[i] = (i % 2 == 0) ? mu - s : mu + s;
  return t;
}

}  // namespace

TEST_CASE("constant image under Haar has LL equal to the constant and no detail") {
  const auto sb = decompose(constant(Tensor<double>({4, 4, 1}, 0.5)), LiftingParams<double>::haar());
  CHECK(sb.ll.shape() == Shape{2, 2, 1});
  for (Index i = 0; i < 4; ++i) {
    CHECK(sb.ll.value()[i] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(sb.lh.value()[i]) < 1e-6);
    CHECK(std::abs(sb.hl.value()[i]) < 1e-6);
    CHECK(std::abs(sb.hh.value()[i]) < 1e-6);
  }
}

TEST_CASE("2x2 diagonal image matches the direct Haar block oracle") {
  const auto sb = decompose(constant(Tensor<double>({2, 2, 1}, {1, 0, 0, 1})), LiftingParams<double>::haar());
  const Block want = haar_block(1, 0, 0, 1);
  CHECK(sb.ll.value().item() == doctest::Approx(want.ll));
  CHECK(sb.lh.value().item() == doctest::Approx(want.lh));
  CHECK(sb.hl.value().item() == doctest::Approx(want.hl));
  CHECK(sb.hh.value().item() == doctest::Approx(want.hh));
  CHECK(want.ll == 0.5);
  CHECK(want.lh == 0.0);
  CHECK(want.hl == 0.0);
  CHECK(want.hh == 2.0);
}

TEST_CASE("Haar decomposition of a random image is blockwise") {
  std::mt19937_64 rng(1);
  const auto img = random_tensor<double>({6, 8, 3}, rng, 0.0, 1.0);
  const auto sb = decompose(constant(img), LiftingParams<double>::haar());
  for (Index y = 0; y < 3; ++y)
    for (Index x = 0; x < 4; ++x)
      for (Index c = 0; c < 3; ++c) {
        const Block b =
            haar_block(img(2 * y, 2 * x, c), img(2 * y, 2 * x + 1, c), img(2 * y + 1, 2 * x, c), img(2 * y + 1, 2 * x + 1, c));
        CHECK(sb.ll.value()(y, x, c) == doctest::Approx(b.ll));
        CHECK(sb.lh.value()(y, x, c) == doctest::Approx(b.lh));
        CHECK(sb.hl.value()(y, x, c) == doctest::Approx(b.hl));
        CHECK(sb.hh.value()(y, x, c) == doctest::Approx(b.hh));
      }
}

TEST_CASE("reconstruction is exact for random lifting taps") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto theta = random_theta<double>(rng);
    const auto img = random_tensor<double>({8, 8, 3}, rng, 0.0, 1.0);
    const auto back = reconstruct(decompose(constant(img), theta), theta).value();
    CHECK(max_abs_diff(back, img) < 1e-10);

    const auto theta_f = random_theta<float>(rng);
    const auto img_f = random_tensor<float>({8, 8, 3}, rng, 0.0, 1.0);
    CHECK(max_abs_diff(reconstruct(decompose(constant(img_f), theta_f), theta_f).value(), img_f) < 1e-5);
  }
}

TEST_CASE("odd sizes are padded for analysis and cropped after synthesis") {
  std::mt19937_64 rng(3);
  for (auto [h, w] : {std::pair<Index, Index>{5, 7}, {1, 1}, {3, 4}, {4, 9}}) {
    const auto theta = random_theta<double>(rng);
    const auto img = random_tensor<double>({h, w, 2}, rng);
    const auto sb = decompose(constant(img), theta);
    CHECK(sb.ll.shape() == Shape{(h + 1) / 2, (w + 1) / 2, 2});
    const auto back = reconstruct(sb, theta).value();
    REQUIRE(back.shape() == img.shape());
    CHECK(max_abs_diff(back, img) < 1e-10);
  }
}

TEST_CASE("all-zero subbands synthesize an all-zero image") {
  const auto z = constant(Tensor<double>({3, 4, 3}));
  const auto img = reconstruct(SubbandSet<double>{z, z, z, z}, LiftingParams<double>::haar()).value();
  CHECK(img.shape() == Shape{6, 8, 3});
  CHECK((img.array() == 0.0).all());
}

TEST_CASE("LL-only subbands synthesize the block replication of LL under Haar") {
  std::mt19937_64 rng(4);
  const auto ll = random_tensor<double>({3, 4, 2}, rng);
  const auto z = constant(Tensor<double>({3, 4, 2}));
  const auto img = reconstruct(SubbandSet<double>{constant(ll), z, z, z}, LiftingParams<double>::haar()).value();
  for (Index y = 0; y < 6; ++y)
    for (Index x = 0; x < 8; ++x)
      for (Index c = 0; c < 2; ++c) CHECK(img(y, x, c) == doctest::Approx(ll(y / 2, x / 2, c)));
}

TEST_CASE("decompose rejects empty images and reconstruct rejects mismatched bands") {
  CHECK_THROWS_AS(decompose(constant(Tensor<double>({0, 4, 1})), LiftingParams<double>::haar()), ShapeError);
  const auto a = constant(Tensor<double>({2, 2, 1}));
  const auto b = constant(Tensor<double>({2, 3, 1}));
  CHECK_THROWS_AS(reconstruct(SubbandSet<double>{a, a, b, a}, LiftingParams<double>::haar()), ShapeError);
}

TEST_CASE("decompose is linear in the image") {
  std::mt19937_64 rng(5);
  const auto theta = random_theta<double>(rng);
  const auto x = random_tensor<double>({8, 6, 3}, rng), y = random_tensor<double>({8, 6, 3}, rng);
  const double a = 0.3, b = -1.7;
  Tensor<double> combo(x.shape());
  combo.array() = a * x.array() + b * y.array();
  const auto sx = decompose(constant(x), theta), sy = decompose(constant(y), theta), sc = decompose(constant(combo), theta);
  auto check = [&](const Var<double>& c, const Var<double>& p, const Var<double>& q) {
    Tensor<double> want(p.shape());
    want.array() = a * p.value().array() + b * q.value().array();
    CHECK(max_abs_diff(c.value(), want) < 1e-6);
  };
  check(sc.ll, sx.ll, sy.ll);
  check(sc.lh, sx.lh, sy.lh);
  check(sc.hl, sx.hl, sy.hl);
  check(sc.hh, sx.hh, sy.hh);
}

TEST_CASE("effective subband weights lie on the simplex") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto w = SubbandWeights<double>{constant(random_tensor<double>({4}, rng, -30.0, 30.0))}.effective().value();
    CHECK((w.array() >= 0.0).all());
    CHECK(std::abs(w.array().sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("reweight scales each band by its weight") {
  std::mt19937_64 rng(7);
  const auto band = [&] { return constant(random_tensor<double>({3, 3, 2}, rng)); };
  const SubbandSet<double> sb{band(), band(), band(), band()};
  auto scaled_by = [](const Var<double>& out, const Var<double>& in, double w) {
    for (Index i = 0; i < in.value().size(); ++i) CHECK(out.value()[i] == doctest::Approx(w * in.value()[i]).epsilon(1e-12));
  };

  SUBCASE("equal logits give 0.25 each") {
    const auto r = reweight(sb, SubbandWeights<double>{constant(Tensor<double>({4}, 0.7))});
    scaled_by(r.ll, sb.ll, 0.25);
    scaled_by(r.lh, sb.lh, 0.25);
    scaled_by(r.hl, sb.hl, 0.25);
    scaled_by(r.hh, sb.hh, 0.25);
  }
  SUBCASE("one dominant logit keeps that band and suppresses the rest") {
    const auto r = reweight(sb, SubbandWeights<double>{constant(Tensor<double>({4}, {0, 0, 50, 0}))});
    CHECK(max_abs_diff(r.hl.value(), sb.hl.value()) < 1e-12);
    CHECK(r.ll.value().array().abs().maxCoeff() < 1e-20);
    CHECK(r.lh.value().array().abs().maxCoeff() < 1e-20);
    CHECK(r.hh.value().array().abs().maxCoeff() < 1e-20);
  }
  SUBCASE("weights (0.4, 0.2, 0.2, 0.2)") {
    const Tensor<double> logits({4}, {std::log(0.4), std::log(0.2), std::log(0.2), std::log(0.2)});
    const auto r = reweight(sb, SubbandWeights<double>{constant(logits)});
    scaled_by(r.ll, sb.ll, 0.4);
    scaled_by(r.lh, sb.lh, 0.2);
    scaled_by(r.hl, sb.hl, 0.2);
    scaled_by(r.hh, sb.hh, 0.2);
  }
}

TEST_CASE("kl_loss closed-form values") {
  const KLPrior prior;
  const double mu0 = prior.mu0, s0 = prior.sigma0;
  CHECK(std::abs(kl_loss(constant(two_point(mu0, s0)), prior).value().item()) < 1e-6);
  CHECK(std::abs(kl_loss(constant(two_point(mu0 + s0, s0, 6)), prior).value().item() - 0.5) < 1e-6);
  CHECK(std::abs(kl_loss(constant(two_point(mu0, 2 * s0, 4)), prior).value().item() - (1.5 - std::log(2.0))) < 1e-6);
}

TEST_CASE("kl_loss is nonnegative over random moments and finite for a constant band") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> mu(-2.0, 2.0), s(1e-4, 3.0), s0(0.01, 2.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const KLPrior prior{mu(rng), s0(rng)};
    CHECK(kl_loss(constant(two_point(mu(rng), s(rng))), prior).value().item() >= -1e-7);
  }
  const auto flat = kl_loss(constant(Tensor<double>({4, 4, 1}, 0.3)), KLPrior{});
  CHECK(std::isfinite(flat.value().item()));
  CHECK(flat.value().item() > 0.0);
  CHECK_THROWS_AS(kl_loss(constant(Tensor<double>({1})), KLPrior{}), ShapeError);
}

TEST_CASE("split keeps LL as luminance and stacks LH, HL, HH as texture") {
  std::mt19937_64 rng(9);
  const auto band = [&] { return constant(random_tensor<double>({2, 3, 3}, rng)); };
  const SubbandSet<double> sb{band(), band(), band(), band()};
  const auto br = split(sb);
  CHECK(br.luminance.value() == sb.ll.value());
  REQUIRE(br.texture.shape() == Shape{2, 3, 9});
  for (Index y = 0; y < 2; ++y)
    for (Index x = 0; x < 3; ++x)
      for (Index c = 0; c < 3; ++c) {
        CHECK(br.texture.value()(y, x, c) == sb.lh.value()(y, x, c));
        CHECK(br.texture.value()(y, x, 3 + c) == sb.hl.value()(y, x, c));
        CHECK(br.texture.value()(y, x, 6 + c) == sb.hh.value()(y, x, c));
      }
  const auto z = constant(Tensor<double>({2, 3, 3}));
  CHECK((split(SubbandSet<double>{band(), z, z, z}).texture.value().array() == 0.0).all());
}

TEST_CASE("decomposition, reweighting and KL gradients pass finite differences") {
  std::mt19937_64 rng(10);
  ParamStore<double> store;
  add_params(store);
  for (auto& e : store) e.value.array() += random_tensor<double>(e.value.shape(), rng, -0.2, 0.2).array();
  store.add("image", random_tensor<double>({6, 5, 3}, rng, 0.0, 1.0));
  const auto w = random_tensor<double>({6, 5, 3}, rng);
  const auto wb = random_tensor<double>({3, 3, 3}, rng);
  LossFn<double> f = [&](Graph<double>& g) {
    const auto theta = bind_lifting(g);
    const auto sb = reweight(decompose(g.param("image"), theta), bind_weights(g));
    const auto br = split(sb);
    return sum(reconstruct(sb, theta) * constant(w)) + sum(slice_channels(br.texture, 3, 3) * constant(wb)) +
           kl_loss(br.luminance, KLPrior{});
  };
  const auto report = finite_diff_check(f, store);
  CHECK_MESSAGE(report.pass(), report.format());
}
