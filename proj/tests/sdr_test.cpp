#include "dtp/sdr.hpp"
#include "dtp/numerics/adam.hpp"
#include "dtp/numerics/gradcheck.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dtp;
using namespace dtp::sdr;
using dtp::test::max_abs_diff;
using dtp::test::random_tensor;

namespace {

NakaRushtonParams<double> nr(double gamma, double sigma, double beta) {
  return NakaRushtonParams<double>::constants(gamma, sigma, beta);
}

/// 3x3 kernel that is zero except for a centre tap matrix (cin x cout).
Tensor<double> centre_kernel(Index cin, Index cout, const std::function<double(Index, Index)>& tap) {
  Tensor<double> k({3, 3, cin, cout});
  for (Index i = 0; i < cin; ++i)
    for (Index o = 0; o < cout; ++o) k[((1 * 3 + 1) * cin + i) * cout + o] = tap(i, o);
  return k;
}

}  // namespace

TEST_CASE("Naka-Rushton maps an all-zero image to zero") {
  const auto out = naka_rushton(constant(Tensor<double>({3, 3, 3})), nr(1.0, 0.3, 0.05)).value();
  CHECK((out.array() == 0.0).all());
  const auto degenerate = naka_rushton(constant(Tensor<double>({2, 2, 1})), nr(1.0, 0.0, 0.0)).value();
  CHECK((degenerate.array() == 0.0).all());
}

TEST_CASE("Naka-Rushton on a constant image with zero threshold and saturation") {
  const double c = 0.37, eps = kNakaRushtonEpsilon;
  const auto out = naka_rushton(constant(Tensor<double>({4, 4, 3}, c)), nr(1.0, 0.0, 0.0)).value();
  for (Index i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - c / (1.0 + eps)) < 1e-6);
}

TEST_CASE("Naka-Rushton single pixel hand arithmetic") {
  const double r = 0.0625 / (0.0625 + 0.25 + 0.1);
  const auto resp = naka_rushton_response(constant(Tensor<double>({1, 1, 1}, 0.25)), nr(2.0, 0.5, 0.1));
  CHECK(std::abs(resp.value().item() - r) < 1e-12);
  CHECK(std::abs(r - 0.151515151515) < 1e-6);
  const auto out = naka_rushton(constant(Tensor<double>({1, 1, 1}, 0.25)), nr(2.0, 0.5, 0.1)).value().item();
  CHECK(std::abs(out - 0.25 / (1.0 + kNakaRushtonEpsilon / r)) < 1e-6);
  CHECK(std::abs(out - 0.25) < 1e-5);
}

TEST_CASE("core response is strictly increasing and bounded") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> g(0.1, 4.0), s(0.0, 1.0), b(0.0, 0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto x = random_tensor<double>({64}, rng, 0.0, 1.0);
    std::sort(x.data(), x.data() + x.size());
    x[0] = 0.0;
    x[63] = 1.0;
    const double beta = b(rng) + 1e-6;
    const auto r = naka_rushton_response(constant(x.reshaped({8, 8, 1})), nr(g(rng), s(rng), beta)).value();
    for (Index i = 1; i < r.size(); ++i) {
      if (x[i] > x[i - 1]) CHECK(r[i] > r[i - 1]);
    }
    CHECK(r[0] >= 0.0);
    CHECK(r[63] < 1.0);
  }
}

TEST_CASE("Naka-Rushton preserves pixel order per channel and stays in [0, 1]") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_tensor<double>({6, 6, 3}, rng, 0.0, 1.0);
    const auto out = naka_rushton(constant(x), nr(0.5 + trial * 0.02, 0.3, 0.05)).value();
    CHECK((out.array() >= 0.0).all());
    CHECK((out.array() <= 1.0).all());
    for (Index c = 0; c < 3; ++c)
      for (Index i = 0; i < 36; ++i)
        for (Index j = 0; j < 36; ++j) {
          const double xi = x[i * 3 + c], xj = x[j * 3 + c];
          if (xi < xj) CHECK(out[i * 3 + c] <= out[j * 3 + c]);
        }
  }
}

TEST_CASE("Naka-Rushton statistics are per channel") {
  Tensor<double> x({2, 1, 2}, {0.2, 0.6, 0.4, 0.8});
  const auto out = naka_rushton(constant(x), nr(1.0, 0.0, 0.0)).value();
  // With sigma = beta = 0 every channel renormalizes to its own mean.
  CHECK(out(0, 0, 0) == doctest::Approx(0.3 / (1 + kNakaRushtonEpsilon)));
  CHECK(out(0, 0, 1) == doctest::Approx(0.7 / (1 + kNakaRushtonEpsilon)));
}

TEST_CASE("zero residual stack is the exact identity") {
  std::mt19937_64 rng(3);
  const auto x = random_tensor<float>({7, 5, 9}, rng);
  const auto out = denoise(constant(x), zero_stack<float>(9, 16, 4)).value();
  CHECK(out == x);

  ParamStore<float> store;
  add_params(store, SdrConfig{}, 9, rng);
  Graph<float> g(store);
  CHECK(denoise(constant(x), bind_stack(g, SdrConfig{})).value() == x);
}

TEST_CASE("a hand-built unit computing -x/2 halves the input") {
  const double slope = kLeakySlope;
  // hidden = [x, -x]; leaky(x) - leaky(-x) = (1 + slope) x.
  const auto w1 = centre_kernel(2, 4, [](Index i, Index o) { return o == i ? 1.0 : (o == i + 2 ? -1.0 : 0.0); });
  const auto w2 = centre_kernel(4, 2, [&](Index i, Index o) {
    const double m = -0.5 / (1.0 + slope);
    return i == o ? m : (i == o + 2 ? -m : 0.0);
  });
  ResidualStack<double> stack;
  stack.units.push_back({constant(w1), constant(Tensor<double>({4})), constant(w2), constant(Tensor<double>({2}))});
  std::mt19937_64 rng(4);
  const auto x = random_tensor<double>({5, 5, 2}, rng);
  const auto out = denoise(constant(x), stack).value();
  for (Index i = 0; i < x.size(); ++i) CHECK(std::abs(out[i] - 0.5 * x[i]) < 1e-12);
}

TEST_CASE("depth composition is exact") {
  std::mt19937_64 rng(5);
  ParamStore<double> store;
  SdrConfig cfg;
  add_params(store, cfg, 6, rng);
  for (auto& e : store) e.value.array() += random_tensor<double>(e.value.shape(), rng, -0.1, 0.1).array();
  Graph<double> g(store);
  const auto stack = bind_stack(g, cfg);
  const auto x = constant(random_tensor<double>({6, 6, 6}, rng));
  const auto full = denoise(x, stack).value();
  for (Index k = 0; k <= cfg.stages; ++k) {
    const auto split = denoise_stages(denoise_stages(x, stack, 0, k), stack, k, cfg.stages).value();
    CHECK(split == full);
  }
}

TEST_CASE("denoise rejects a channel mismatch and an empty stack") {
  const auto stack = zero_stack<double>(9, 4, 2);
  CHECK_THROWS_AS(denoise(constant(Tensor<double>({4, 4, 6})), stack), ShapeError);
  CHECK_THROWS_AS(denoise(constant(Tensor<double>({4, 4, 9})), ResidualStack<double>{}), std::invalid_argument);
}

TEST_CASE("parameter constraints and initial values") {
  std::mt19937_64 rng(6);
  ParamStore<double> store;
  SdrConfig cfg;
  add_params(store, cfg, 9, rng);
  Graph<double> g(store);
  const auto p = bind_naka_rushton(g);
  CHECK(p.gamma.value().item() == doctest::Approx(1.0));
  CHECK(p.sigma.value().item() == doctest::Approx(0.3));
  CHECK(p.beta.value().item() == doctest::Approx(0.05));
  store.value(kGammaRaw)[0] = -30.0;
  store.value(kSigmaRaw)[0] = -30.0;
  Graph<double> g2(store);
  const auto q = bind_naka_rushton(g2);
  CHECK(q.gamma.value().item() > 0.0);
  CHECK(q.sigma.value().item() >= 0.0);
}

TEST_CASE("Naka-Rushton and residual stack gradients pass finite differences") {
  std::mt19937_64 rng(7);
  ParamStore<double> store;
  SdrConfig cfg{1.3, 0.3, 0.05, 2, 4};
  add_params(store, cfg, 3, rng);
  for (auto& e : store) e.value.array() += random_tensor<double>(e.value.shape(), rng, -0.2, 0.2).array();
  store.add("lum", random_tensor<double>({5, 4, 3}, rng, 0.05, 0.95));
  store.add("tex", random_tensor<double>({5, 4, 3}, rng));
  const auto w = random_tensor<double>({5, 4, 3}, rng);
  LossFn<double> f = [&](Graph<double>& g) {
    const auto lum = naka_rushton(g.param("lum"), bind_naka_rushton(g));
    const auto tex = denoise(g.param("tex"), bind_stack(g, cfg));
    return sum(lum * constant(w)) + mean(tex * tex);
  };
  store.set_learnable("lum", false);
  store.set_learnable("tex", false);
  const auto params = finite_diff_check(f, store);
  CHECK_MESSAGE(params.pass(), params.format());

  // Input pixels near zero sit where x^gamma is strongly curved, so the
  // input check uses a smaller step to keep truncation error below tolerance.
  for (auto& e : store) e.learnable = !e.learnable;
  FdOptions fine;
  fine.step = 1e-5;
  const auto inputs = finite_diff_check(f, store, fine);
  CHECK(inputs.params.size() == 2);
  CHECK_MESSAGE(inputs.pass(), inputs.format());
}

TEST_CASE("a briefly trained residual stack reduces texture noise on held-out data") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.15);
  auto make = [&](int n) {
    std::vector<std::pair<Tensor<double>, Tensor<double>>> out;
    std::uniform_real_distribution<double> phase(0.0, 6.28), freq(0.3, 0.9);
    for (int i = 0; i < n; ++i) {
      Tensor<double> clean({8, 8, 3}), noisy({8, 8, 3});
      const double p = phase(rng), f = freq(rng);
      for (Index y = 0; y < 8; ++y)
        for (Index x = 0; x < 8; ++x)
          for (Index c = 0; c < 3; ++c) {
            clean(y, x, c) = 0.3 * std::sin(f * (x + y) + p + c);
            noisy(y, x, c) = clean(y, x, c) + noise(rng);
          }
      out.emplace_back(noisy, clean);
    }
    return out;
  };
  const auto train = make(16), held = make(8);
  SdrConfig cfg{1.0, 0.3, 0.05, 2, 8};
  ParamStore<double> store;
  add_params(store, cfg, 3, rng);
  for (const auto& n : {kGammaRaw, kSigmaRaw, kBetaRaw}) store.set_learnable(n, false);
  auto mse = [](const Tensor<double>& a, const Tensor<double>& b) { return (a.array() - b.array()).square().mean(); };
  auto held_mse = [&] {
    double in = 0, out = 0;
    Graph<double> g(store);
    const auto stack = bind_stack(g, cfg);
    for (const auto& [noisy, clean] : held) {
      in += mse(noisy, clean);
      out += mse(denoise(constant(noisy), stack).value(), clean);
    }
    return std::pair{in, out};
  };
  const auto [in_before, out_before] = held_mse();
  CHECK(out_before == doctest::Approx(in_before));
  Adam<double> opt(store, AdamConfig{5e-3});
  for (int step = 0; step < 150; ++step) {
    const auto& [noisy, clean] = train[static_cast<std::size_t>(step) % train.size()];
    Graph<double> g(store);
    const auto d = denoise(constant(noisy), bind_stack(g, cfg)) - constant(clean);
    g.backward_into(mean(d * d), store);
    opt.step(store);
  }
  const auto [in_after, out_after] = held_mse();
  CHECK(out_after < in_after);
}
