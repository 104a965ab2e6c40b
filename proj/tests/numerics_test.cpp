#include "dtp/numerics/adam.hpp"
#include "dtp/numerics/checkpoint.hpp"
#include "dtp/numerics/gradcheck.hpp"
#include "dtp/numerics/ops.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

using namespace dtp;
using dtp::test::max_abs_diff;
using dtp::test::naive_conv2d;
using dtp::test::random_tensor;

TEST_CASE("conv2d: scalar kernel scales a constant image") {
  Tensor<double> in({1, 3, 3, 1}, 1.0);
  Tensor<double> k({1, 1, 1, 1}, 2.0);
  const auto out = conv2d(in, k, 1, Padding::Same);
  CHECK(out.shape() == Shape{1, 3, 3, 1});
  for (Index i = 0; i < out.size(); ++i) CHECK(out[i] == 2.0);
}

TEST_CASE("conv2d: 2x2 averaging kernel with valid padding") {
  Tensor<double> in({1, 2, 2, 1}, {1, 2, 3, 4});
  Tensor<double> k({2, 2, 1, 1}, 0.25);
  const auto out = conv2d(in, k, 1, Padding::Valid);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("conv2d matches the six-loop reference on random cases") {
  std::mt19937_64 rng(11);
  {
    const auto in = random_tensor<double>({5, 5, 2}, rng);
    const auto k = random_tensor<double>({3, 3, 2, 4}, rng);
    CHECK(max_abs_diff(conv2d(in, k, 1, Padding::Same), naive_conv2d(in, k, 1, true)) < 1e-6);
  }
  std::uniform_int_distribution<int> dim(1, 7), ch(1, 4), ks(1, 4), st(1, 3), pad(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const Index h = dim(rng) + 2, w = dim(rng) + 2, ci = ch(rng), co = ch(rng);
    const Index kh = std::min<Index>(ks(rng), h), kw = std::min<Index>(ks(rng), w);
    const Index stride = st(rng);
    const bool same = pad(rng) == 1;
    const auto in = random_tensor<double>({h, w, ci}, rng);
    const auto k = random_tensor<double>({kh, kw, ci, co}, rng);
    const auto got = conv2d(in, k, stride, same ? Padding::Same : Padding::Valid);
    const auto want = naive_conv2d(in, k, stride, same);
    REQUIRE(got.shape() == want.shape());
    CHECK(max_abs_diff(got, want) < 1e-6);
  }
}

TEST_CASE("conv2d float path agrees with the double reference") {
  std::mt19937_64 rng(5);
  const auto in = random_tensor<double>({6, 7, 3}, rng);
  const auto k = random_tensor<double>({3, 3, 3, 5}, rng);
  const auto got = conv2d(in.cast<float>(), k.cast<float>()).cast<double>();
  CHECK(max_abs_diff(got, naive_conv2d(in, k, 1, true)) < 1e-5);
}

TEST_CASE("conv2d rejects bad shapes with both shapes in the message") {
  Tensor<double> in({4, 4, 2});
  Tensor<double> k({3, 3, 3, 1});
  try {
    (void)conv2d(in, k);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(shape_str(in.shape())) != std::string::npos);
    CHECK(msg.find(shape_str(k.shape())) != std::string::npos);
  }
  CHECK_THROWS_AS((void)conv2d(in, Tensor<double>({3, 3, 2, 1}), 0), ShapeError);
}

TEST_CASE("conv2d gradients against finite differences for every stride and padding") {
  std::mt19937_64 rng(3);
  for (Index stride : {1, 2})
    for (Padding pad : {Padding::Same, Padding::Valid}) {
      ParamStore<double> store;
      store.add("x", random_tensor<double>({5, 6, 2}, rng));
      store.add("k", random_tensor<double>({3, 2, 2, 3}, rng));
      const auto weights = random_tensor<double>(conv_geometry({5, 6, 2}, {3, 2, 2, 3}, stride, pad).output_shape(), rng);
      LossFn<double> f = [&](Graph<double>& g) {
        return sum(conv2d(g.param("x"), g.param("k"), stride, pad) * constant(weights));
      };
      const auto report = finite_diff_check(f, store);
      CHECK_MESSAGE(report.pass(), report.format());
    }
}

TEST_CASE("backward: sum of a parameter has unit gradient") {
  const auto p = variable(Tensor<double>({4}, {1, 2, 3, 4}));
  backward(sum(p));
  for (Index i = 0; i < 4; ++i) CHECK(p.node()->grad[i] == 1.0);
}

TEST_CASE("backward: sum of squares has gradient 2p") {
  const auto p = variable(Tensor<double>({3}, {1, -2, 3}));
  backward(sum(p * p));
  CHECK(p.node()->grad == Tensor<double>({3}, {2, -4, 6}));
}

TEST_CASE("backward rejects a non-scalar root") {
  const auto p = variable(Tensor<double>({3}, {1, -2, 3}));
  CHECK_THROWS_AS(backward(p * p), ShapeError);
}

TEST_CASE("graph gradients are zero for unreachable and frozen parameters") {
  ParamStore<double> store;
  store.add("used", Tensor<double>({2}, {1, 2}));
  store.add("unused", Tensor<double>({2}, {3, 4}));
  store.add("frozen", Tensor<double>({2}, {5, 6}), false);
  Graph<double> g(store);
  const auto grads = g.gradients(sum(g.param("used") * g.param("frozen")));
  CHECK(grads[0] == Tensor<double>({2}, {5, 6}));
  CHECK(grads[1] == Tensor<double>({2}));
  CHECK(grads[2] == Tensor<double>({2}));
}

TEST_CASE("backward is linear in the loss") {
  std::mt19937_64 rng(17);
  ParamStore<double> store;
  store.add("x", random_tensor<double>({4, 4, 2}, rng));
  store.add("k", random_tensor<double>({3, 3, 2, 2}, rng));
  auto f = [](Graph<double>& g) { return sum(sigmoid(conv2d(g.param("x"), g.param("k")))); };
  auto h = [](Graph<double>& g) { return mean(exp(g.param("x")) * g.param("x")) + sum(g.param("k") * g.param("k")); };
  const double a = 0.7, b = -1.3;
  Graph<double> gf(store), gh(store), gc(store);
  const auto df = gf.gradients(f(gf));
  const auto dh = gh.gradients(h(gh));
  const auto dc = gc.gradients(scale(f(gc), a) + scale(h(gc), b));
  for (std::size_t i = 0; i < df.size(); ++i)
    for (Index j = 0; j < df[i].size(); ++j) CHECK(std::abs(dc[i][j] - (a * df[i][j] + b * dh[i][j])) < 1e-6);
}

TEST_CASE("activations stay in their analytic ranges") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = constant(random_tensor<double>({16}, rng, -50.0, 50.0));
    const auto s = sigmoid(x).value();
    CHECK((s.array() >= 0.0).all());
    CHECK((s.array() <= 1.0).all());
    const auto p = softmax(x).value();
    CHECK((p.array() >= 0.0).all());
    CHECK(std::abs(p.array().sum() - 1.0) < 1e-6);
    CHECK((softplus(x).value().array() >= 0.0).all());
  }
}

TEST_CASE("repeated evaluation is bit-identical") {
  std::mt19937_64 rng(29);
  const auto x = constant(random_tensor<float>({8, 8, 3}, rng));
  const auto k = constant(random_tensor<float>({3, 3, 3, 4}, rng));
  const auto a = sigmoid(conv2d(x, k)).value();
  const auto b = sigmoid(conv2d(x, k)).value();
  CHECK(a == b);
}

TEST_CASE("clamp passes gradient inside and at the boundary, blocks outside") {
  const auto x = variable(Tensor<double>({5}, {-0.5, 0.0, 0.5, 1.0, 1.5}));
  backward(sum(clamp(x, 0.0, 1.0)));
  CHECK(x.node()->grad == Tensor<double>({5}, {0, 1, 1, 1, 0}));
}

TEST_CASE("pow treats zero base as zero with zero gradient and rejects negatives") {
  const auto x = variable(Tensor<double>({3}, {0.0, 0.25, 1.0}));
  const auto e = variable(Tensor<double>::scalar(0.5));
  const auto y = pow(x, e);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == doctest::Approx(0.5));
  backward(sum(y));
  CHECK(x.node()->grad[0] == 0.0);
  CHECK(x.node()->grad[1] == doctest::Approx(1.0));
  CHECK(e.node()->grad.item() == doctest::Approx(0.5 * std::log(0.25)));
  CHECK_THROWS_AS((void)pow(constant(Tensor<double>({1}, {-1.0})), e), std::domain_error);
}

TEST_CASE("saturating ratio maps 0/0 to 0") {
  const auto r = saturating_ratio(constant(Tensor<double>({2}, {0.0, 1.0})), constant_scalar(0.0));
  CHECK(r.value() == Tensor<double>({2}, {0.0, 1.0}));
}

TEST_CASE("pixel shuffle follows the documented index table") {
  // 1 x 1 x 8 with r = 2 -> 2 x 2 x 2; out(i, j, c) = in(0, 0, c*4 + i*2 + j).
  Tensor<double> in({1, 1, 8}, {0, 1, 2, 3, 4, 5, 6, 7});
  const auto out = pixel_shuffle(in, 2);
  CHECK(out.shape() == Shape{2, 2, 2});
  CHECK(out(0, 0, 0) == 0);
  CHECK(out(0, 1, 0) == 1);
  CHECK(out(1, 0, 0) == 2);
  CHECK(out(1, 1, 0) == 3);
  CHECK(out(0, 0, 1) == 4);
  CHECK(out(0, 1, 1) == 5);
  CHECK(out(1, 0, 1) == 6);
  CHECK(out(1, 1, 1) == 7);

  std::mt19937_64 rng(31);
  for (Index r : {2, 4}) {
    const auto t = random_tensor<double>({3, 2, 2 * r * r}, rng);
    const auto s = pixel_shuffle(t, r);
    CHECK(s.shape() == Shape{3 * r, 2 * r, 2});
    for (Index y = 0; y < 3; ++y)
      for (Index x = 0; x < 2; ++x)
        for (Index c = 0; c < 2; ++c)
          for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < r; ++j) CHECK(s(y * r + i, x * r + j, c) == t(y, x, c * r * r + i * r + j));
    CHECK(pixel_unshuffle(s, r) == t);
  }
}

TEST_CASE("elementwise ops, reductions and rearrangements pass finite differences") {
  std::mt19937_64 rng(37);
  ParamStore<double> store;
  store.add("a", random_tensor<double>({4, 5, 3}, rng, 0.2, 1.0));
  store.add("b", random_tensor<double>({3}, rng, 0.5, 1.5));
  store.add("c", random_tensor<double>({1, 1, 3}, rng));
  store.add("e", Tensor<double>::scalar(1.3));
  store.add("o", Tensor<double>::scalar(0.4));
  store.add("v", random_tensor<double>({4}, rng));
  const auto w = random_tensor<double>({4, 5, 3}, rng);
  LossFn<double> f = [&](Graph<double>& g) {
    const auto a = g.param("a"), b = g.param("b"), c = g.param("c");
    auto t = (a + b) * c - a / b;
    t = t + log(a) * sqrt(a) + softplus(t) + leaky_relu(t, 0.1);
    t = t + pow(a, g.param("e")) + saturating_ratio(a, g.param("o"));
    t = concat_channels<double>({t, channel_mean(t), channel_max(t)});
    t = slice_channels(t, 1, 3) + spatial_mean(a);
    const auto p = softmax(g.param("v"));
    return sum(t * constant(w)) * element(p, 2) + mean(abs(t)) + sum(exp(scale(a, -1.0)));
  };
  const auto report = finite_diff_check(f, store);
  CHECK_MESSAGE(report.pass(), report.format());
}

TEST_CASE("lifting primitives pass finite differences") {
  std::mt19937_64 rng(41);
  ParamStore<double> store;
  store.add("x", random_tensor<double>({5, 7, 2}, rng));
  store.add("taps", random_tensor<double>({2}, rng));
  const auto w = random_tensor<double>({5, 7, 2}, rng);
  LossFn<double> f = [&](Graph<double>& g) {
    const auto x = pad_to_even(g.param("x"));
    const auto even = take_phase(x, 1, 0), odd = take_phase(x, 1, 1);
    const auto d = lift(odd, even, g.param("taps"), 1, Neighbor::Next, -1.0);
    const auto s = lift(even, d, g.param("taps"), 1, Neighbor::Previous, 1.0);
    return sum(crop(interleave(s, d, 1), 5, 7) * constant(w));
  };
  const auto report = finite_diff_check(f, store);
  CHECK_MESSAGE(report.pass(), report.format());
}

TEST_CASE("finite_diff_check on simple functions") {
  std::mt19937_64 rng(43);
  ParamStore<double> store;
  store.add("p", random_tensor<double>({3, 3, 2}, rng));
  store.add("k", random_tensor<double>({3, 3, 2, 2}, rng));

  SUBCASE("sum of squares passes") {
    LossFn<double> f = [](Graph<double>& g) { return sum(g.param("p") * g.param("p")) + sum(g.param("k") * g.param("k")); };
    const auto report = finite_diff_check(f, store, FdOptions{1e-3, 1e-4});
    CHECK(report.pass());
    CHECK(report.params.size() == 2);
  }
  SUBCASE("conv + sigmoid chain passes") {
    LossFn<double> f = [](Graph<double>& g) { return sum(sigmoid(conv2d(g.param("p"), g.param("k")))); };
    CHECK(finite_diff_check(f, store, FdOptions{1e-3, 1e-4}).pass());
  }
  SUBCASE("a gradient scaled by 1.01 fails") {
    LossFn<double> f = [](Graph<double>& g) { return sum(sigmoid(conv2d(g.param("p"), g.param("k")))); };
    Graph<double> g(store);
    auto grads = g.gradients(f(g));
    for (auto& t : grads) t.array() *= 1.01;
    const auto report = finite_diff_check(f, store, grads, FdOptions{1e-3, 1e-4});
    CHECK_FALSE(report.pass());
    CHECK(report.max_rel_error() > 5e-3);
  }
  SUBCASE("a non-deterministic loss is rejected") {
    int calls = 0;
    LossFn<double> f = [&](Graph<double>& g) { return scale(sum(g.param("p")), 1.0 + 1e-3 * ++calls); };
    CHECK_THROWS_AS(finite_diff_check(f, store), std::runtime_error);
  }
  SUBCASE("frozen parameters are not reported") {
    store.set_learnable("k", false);
    LossFn<double> f = [](Graph<double>& g) { return sum(conv2d(g.param("p"), g.param("k"))); };
    const auto report = finite_diff_check(f, store);
    REQUIRE(report.params.size() == 1);
    CHECK(report.params[0].name == "p");
  }
}

TEST_CASE("relative error definition") {
  CHECK(fd_relative_error(1.0, 1.0) == 0.0);
  CHECK(fd_relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(fd_relative_error(1e-12, 0.0) == doctest::Approx(1e-4));
}

TEST_CASE("param store keeps insertion order and unique names") {
  ParamStore<float> store;
  store.add("b", Tensor<float>({1}));
  store.add("a", Tensor<float>({2}));
  CHECK_THROWS_AS(store.add("a", Tensor<float>({1})), std::invalid_argument);
  CHECK(store.entry(0).name == "b");
  CHECK(store.entry(1).name == "a");
  CHECK(store.scalar_count() == 3);
  CHECK_THROWS_AS((void)store.index_of("missing"), std::out_of_range);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  std::mt19937_64 rng(47);
  ParamStore<float> store;
  store.add("w", random_tensor<float>({3, 3, 2, 4}, rng));
  store.add("s", Tensor<float>::scalar(std::nextafter(1.0f, 2.0f)));
  store.add("frozen", random_tensor<float>({5}, rng), false);
  nlohmann::json meta = {{"note", "x"}};
  const std::string bytes = encode_checkpoint(store, meta);
  nlohmann::json meta_back;
  const auto back = decode_checkpoint<float>(bytes, &meta_back);
  CHECK(back == store);
  CHECK(meta_back == meta);
  CHECK(encode_checkpoint(back, meta_back) == bytes);
  CHECK_FALSE(back.entry("frozen").learnable);

  const auto wide = decode_checkpoint<double>(bytes);
  CHECK(wide.value("w").cast<float>() == store.value("w"));
}

TEST_CASE("checkpoint decoding fails loudly on bad input") {
  ParamStore<double> store;
  store.add("w", Tensor<double>({2}, {1, 2}));
  const std::string bytes = encode_checkpoint(store);
  std::string bumped = bytes;
  const auto at = bumped.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  bumped.replace(at, 11, "\"version\":9");
  CHECK_THROWS_AS(decode_checkpoint<double>(bumped), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint<double>(bytes + "x"), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint<double>(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint<double>("garbage"), CheckpointError);
}

TEST_CASE("adam with zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(53);
  ParamStore<float> store;
  store.add("w", random_tensor<float>({10}, rng));
  const auto before = store;
  store.grad("w") = random_tensor<float>({10}, rng);
  Adam<float> opt(store, AdamConfig{0.0});
  for (int i = 0; i < 5; ++i) opt.step(store);
  CHECK(store == before);
}

TEST_CASE("adam first step moves each coordinate by the learning rate against the gradient sign") {
  ParamStore<double> store;
  store.add("w", Tensor<double>({3}, {0, 0, 0}));
  store.add("f", Tensor<double>({1}, {0}), false);
  store.grad("w") = Tensor<double>({3}, {2.0, -0.5, 0.0});
  store.grad("f") = Tensor<double>({1}, {1.0});
  Adam<double> opt(store, AdamConfig{0.1});
  opt.step(store);
  CHECK(store.value("w")[0] == doctest::Approx(-0.1));
  CHECK(store.value("w")[1] == doctest::Approx(0.1));
  CHECK(store.value("w")[2] == 0.0);
  CHECK(store.value("f")[0] == 0.0);
}

TEST_CASE("finite_diff_check uses a one-sided stencil next to a kink") {
  ParamStore<double> store;
  store.add("x", Tensor<double>({2}, {1e-9, -1e-9}));
  LossFn<double> f = [](Graph<double>& g) {
    const auto x = g.param("x");
    return sum(abs(x) + x * x * x);
  };
  const auto report = finite_diff_check(f, store);
  REQUIRE(report.params.size() == 1);
  CHECK(report.params[0].checked == 2);
  CHECK(report.params[0].one_sided == 2);
  CHECK(report.params[0].skipped == 0);
  CHECK(report.pass());

  // A gradient that is wrong on the smooth side is still caught.
  Graph<double> g(store);
  auto analytic = g.gradients(f(g));
  analytic[0][0] *= 1.01;
  CHECK_FALSE(finite_diff_check(f, store, analytic).pass());
}
