#include <doctest.h>

#include <cmath>
#include <random>

#include "hajscc/errors.hpp"
#include "hajscc/gradcheck.hpp"
#include "hajscc/layers.hpp"

using namespace hajscc;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

const OmegaMap kMap = OmegaMap::from_range(0.0, 20.0);
constexpr double kOmegas[] = {0.0, 5.0, 10.0, 15.0, 20.0};

Tensor run(HyperLayer& layer, const Tensor& x, double omega_db) {
  Tape tape;
  return layer.forward(tape, tape.constant(x), omega_db).value();
}

Tensor run(ResidualBlock& block, const Tensor& x, double omega_db) {
  Tape tape;
  return block.forward(tape, tape.constant(x), std::span<const double>(&omega_db, 1)).value();
}

HyperLayer with_identity_scale(const HyperLayer& base) {
  HyperLayer copy = base;
  copy.scale() = HyperScale::identity(base.out_channels(), kMap);
  return copy;
}

}  // namespace

TEST_CASE("omega map sends the training range onto [-1, 1]") {
  CHECK(kMap(0.0) == -1.0);
  CHECK(kMap(20.0) == 1.0);
  CHECK(kMap(10.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(OmegaMap::from_range(5.0, 5.0), ConfigError);
}

TEST_CASE("hyper scale vector examples") {
  HyperScale id = HyperScale::identity(3, kMap);
  for (double w : kOmegas) {
    Tape tape;
    const Tensor s = hyper_scale_vector(tape, id, w).value();
    for (double v : s.data()) CHECK(v == 1.0);
  }

  HyperScale h{Tensor({2}, {1.0, -1.0}), Tensor({2}, {0.0, 3.0}), OmegaMap{1.0, 0.0}};
  h.nu.set_requires_grad(true);
  h.c.set_requires_grad(true);
  Tape tape;
  Var s = hyper_scale_vector(tape, h, 2.0);
  CHECK(s.value()[0] == 2.0);
  CHECK(s.value()[1] == 1.0);
  tape.backward(ops::sum(s));
  CHECK(h.nu.grad()[0] == 2.0);
  CHECK(h.nu.grad()[1] == 2.0);
  CHECK(h.c.grad()[0] == 1.0);
  CHECK(h.c.grad()[1] == 1.0);
}

TEST_CASE("dense layer arithmetic example") {
  DenseLayer d{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, 0.0), ActivationKind::kNone};
  HyperScale s{Tensor({2}, 0.0), Tensor({2}, {2.0, 3.0}), kMap};
  HyperLayer layer(d, s);
  const Tensor out = run(layer, Tensor({1, 2}, {1.0, 1.0}), 7.0);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 3.0);
}

TEST_CASE("scale-absent dense layer computes act(W0 f + b0)") {
  Rng rng(3);
  DenseLayer d = DenseLayer::init(3, 2, ActivationKind::kTanh, rng);
  d.b0 = random_tensor({2}, rng);
  HyperLayer layer(d, std::nullopt);
  const Tensor x = random_tensor({4, 3}, rng);
  const Tensor out = run(layer, x, 10.0);
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t j = 0; j < 2; ++j) {
      double a = d.b0[j];
      for (std::size_t i = 0; i < 3; ++i) a += d.W0[j * 3 + i] * x[b * 3 + i];
      CHECK(out[b * 2 + j] == doctest::Approx(std::tanh(a)).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(run(layer, Tensor({4, 5}), 10.0), DimensionError);
}

TEST_CASE("identity scaling is bit-identical to the base layer for every kind") {
  Rng rng(11);
  std::vector<std::pair<HyperLayer, Tensor>> cases;
  cases.emplace_back(HyperLayer(DenseLayer::init(6, 5, ActivationKind::kRelu, rng), std::nullopt),
                     random_tensor({3, 6}, rng));
  cases.emplace_back(
      HyperLayer(Conv2dLayer::init(2, 4, 3, 1, 1, 1, ActivationKind::kRelu, rng), std::nullopt),
      random_tensor({2, 2, 5, 5}, rng));
  cases.emplace_back(
      HyperLayer(Conv2dLayer::init(3, 4, 4, 2, 1, 1, ActivationKind::kTanh, rng), std::nullopt),
      random_tensor({2, 3, 6, 6}, rng));
  cases.emplace_back(
      HyperLayer(Conv2dLayer::init(2, 3, 3, 1, 1, 2, ActivationKind::kTanh, rng), std::nullopt),
      random_tensor({2, 2, 3, 3}, rng));
  for (auto& [base, x] : cases) {
    for (auto& v : (base.is_dense() ? base.dense().b0 : base.conv().b0).data()) v = 0.1;
    HyperLayer scaled = with_identity_scale(base);
    for (double w : kOmegas) {
      const Tensor a = run(base, x, w);
      const Tensor b = run(scaled, x, w);
      CHECK(a.values() == b.values());
    }
  }

  HyperLayer c1(Conv2dLayer::init(2, 3, 3, 2, 1, 1, ActivationKind::kRelu, rng), std::nullopt);
  HyperLayer c2(Conv2dLayer::init(3, 3, 3, 1, 1, 1, ActivationKind::kNone, rng), std::nullopt);
  HyperLayer proj(Conv2dLayer::init(2, 3, 1, 2, 0, 1, ActivationKind::kNone, rng), std::nullopt);
  ResidualBlock plain(c1, c2, proj, ActivationKind::kRelu);
  ResidualBlock scaled(with_identity_scale(c1), with_identity_scale(c2), with_identity_scale(proj),
                       ActivationKind::kRelu);
  const Tensor x = random_tensor({2, 2, 5, 5}, rng);
  for (double w : kOmegas) CHECK(run(plain, x, w).values() == run(scaled, x, w).values());
}

TEST_CASE("single-channel scale of 2 doubles the base convolution") {
  Rng rng(5);
  Conv2dLayer c = Conv2dLayer::init(2, 1, 3, 1, 1, 1, ActivationKind::kNone, rng);
  c.b0[0] = 0.3;
  HyperLayer base(c, std::nullopt);
  HyperLayer doubled(c, HyperScale{Tensor({1}, 0.0), Tensor({1}, 2.0), kMap});
  const Tensor x = random_tensor({1, 2, 4, 4}, rng);
  const Tensor a = run(base, x, 3.0);
  const Tensor b = run(doubled, x, 3.0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == 2.0 * a[i]);
}

TEST_CASE("kernel scaling and output-channel scaling agree on random shapes") {
  Rng rng(17);
  std::uniform_int_distribution<std::size_t> ch(1, 4), kk(1, 3), hw(3, 7), st(1, 2);
  std::uniform_real_distribution<double> snr(0.0, 20.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cin = ch(rng), cout = ch(rng), k = kk(rng), stride = st(rng);
    const std::size_t pad = (k - 1) / 2;
    std::size_t h = hw(rng);
    while ((h + 2 * pad - k) % stride != 0) ++h;
    Conv2dLayer c = Conv2dLayer::init(cin, cout, k, stride, pad, 1, ActivationKind::kNone, rng);
    c.b0 = random_tensor({cout}, rng);
    HyperLayer layer(c, HyperScale{random_tensor({cout}, rng), random_tensor({cout}, rng), kMap});
    const Tensor x = random_tensor({2, cin, h, h}, rng);
    const double w = snr(rng);

    Tape tape;
    Var direct = layer.pre_activation(tape, tape.constant(x), std::span<const double>(&w, 1));
    auto [kernels, bias] = materialize_conv(tape, layer, w);
    Var folded = ops::conv2d(tape.constant(x), kernels, bias, stride, pad);
    REQUIRE(direct.shape() == folded.shape());
    for (std::size_t i = 0; i < direct.size(); ++i) {
      worst = std::max(worst, std::abs(direct.value()[i] - folded.value()[i]));
    }
  }
  CHECK(worst <= 1e-12);

  // The fixed 2x4x4 case.
  Conv2dLayer c = Conv2dLayer::init(2, 3, 3, 1, 1, 1, ActivationKind::kNone, rng);
  HyperLayer layer(c, HyperScale{random_tensor({3}, rng), random_tensor({3}, rng), kMap});
  const Tensor x = random_tensor({1, 2, 4, 4}, rng);
  const double w = 12.0;
  Tape tape;
  Var direct = layer.pre_activation(tape, tape.constant(x), std::span<const double>(&w, 1));
  auto [kernels, bias] = materialize_conv(tape, layer, w);
  Var folded = ops::conv2d(tape.constant(x), kernels, bias, 1, 1);
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(std::abs(direct.value()[i] - folded.value()[i]) <= 1e-12);
  }
}

TEST_CASE("parameter count examples") {
  Rng rng(1);
  HyperLayer dense(DenseLayer::init(4, 8, ActivationKind::kRelu, rng), HyperScale::identity(8, kMap));
  CHECK(dense.param_counts().base == 40);
  CHECK(dense.param_counts().introduced == 16);

  HyperLayer conv(Conv2dLayer::init(3, 16, 3, 1, 1, 1, ActivationKind::kRelu, rng),
                  HyperScale::identity(16, kMap));
  CHECK(conv.param_counts().base == 448);
  CHECK(conv.param_counts().introduced == 32);

  HyperLayer plain(Conv2dLayer::init(3, 16, 3, 1, 1, 1, ActivationKind::kRelu, rng), std::nullopt);
  CHECK(plain.param_counts().base == 448);
  CHECK(plain.param_counts().introduced == 0);
}

TEST_CASE("introduced parameters are twice the output channels for every kind") {
  Rng rng(23);
  std::uniform_int_distribution<std::size_t> width(1, 12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = width(rng), out = width(rng);
    HyperLayer d(DenseLayer::init(in, out, ActivationKind::kNone, rng),
                 HyperScale::identity(out, kMap));
    CHECK(d.param_counts().introduced == 2 * out);
    HyperLayer c(Conv2dLayer::init(in, out, 3, 1, 1, 1, ActivationKind::kNone, rng),
                 HyperScale::identity(out, kMap));
    CHECK(c.param_counts().introduced == 2 * out);
    HyperLayer t(Conv2dLayer::init(in, out, 3, 1, 1, 2, ActivationKind::kNone, rng),
                 HyperScale::identity(out, kMap));
    CHECK(t.param_counts().introduced == 2 * out);
    CHECK(t.param_counts().base == in * out * 9 + out);
  }
}

TEST_CASE("a nonzero nu makes the output depend on the SNR") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    HyperLayer layer(DenseLayer::init(5, 4, ActivationKind::kTanh, rng),
                     HyperScale{random_tensor({4}, rng), Tensor({4}, 1.0), kMap});
    const Tensor x = random_tensor({2, 5}, rng);
    CHECK(run(layer, x, 0.0).values() != run(layer, x, 20.0).values());
  }
}

TEST_CASE("residual block examples") {
  Rng rng(31);
  Conv2dLayer k1 = Conv2dLayer::init(3, 3, 3, 1, 1, 1, ActivationKind::kRelu, rng);
  Conv2dLayer k2 = Conv2dLayer::init(3, 3, 3, 1, 1, 1, ActivationKind::kNone, rng);
  for (double& v : k1.C0.data()) v = 0.0;
  for (double& v : k2.C0.data()) v = 0.0;
  ResidualBlock zero(HyperLayer(k1, HyperScale::identity(3, kMap)),
                     HyperLayer(k2, HyperScale::identity(3, kMap)), std::nullopt,
                     ActivationKind::kTanh);
  const Tensor x = random_tensor({2, 3, 4, 4}, rng);
  const Tensor out = run(zero, x, 9.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == std::tanh(x[i]));

  // Without a projection the channel counts must already match.
  ResidualBlock widen(HyperLayer(Conv2dLayer::init(3, 4, 3, 1, 1, 1, ActivationKind::kRelu, rng),
                                 std::nullopt),
                      HyperLayer(Conv2dLayer::init(4, 4, 3, 1, 1, 1, ActivationKind::kNone, rng),
                                 std::nullopt),
                      std::nullopt, ActivationKind::kRelu);
  CHECK_THROWS_AS(run(widen, x, 9.0), DimensionError);
  CHECK_THROWS_AS(ResidualBlock(HyperLayer(DenseLayer::init(3, 3, ActivationKind::kNone, rng),
                                           std::nullopt),
                                HyperLayer(k2, std::nullopt), std::nullopt, ActivationKind::kRelu),
                  ConfigError);
}

TEST_CASE("residual block gradients match finite differences through both branches") {
  Rng rng(37);
  HyperLayer c1(Conv2dLayer::init(2, 3, 3, 1, 1, 1, ActivationKind::kTanh, rng),
                HyperScale{random_tensor({3}, rng), random_tensor({3}, rng, 0.5, 1.5), kMap});
  HyperLayer c2(Conv2dLayer::init(3, 3, 3, 1, 1, 1, ActivationKind::kNone, rng),
                HyperScale{random_tensor({3}, rng), random_tensor({3}, rng, 0.5, 1.5), kMap});
  HyperLayer proj(Conv2dLayer::init(2, 3, 1, 1, 0, 1, ActivationKind::kNone, rng),
                  HyperScale{random_tensor({3}, rng), random_tensor({3}, rng, 0.5, 1.5), kMap});
  ResidualBlock block(c1, c2, proj, ActivationKind::kTanh);
  Tensor x = random_tensor({2, 2, 4, 4}, rng);
  NamedParams named;
  block.collect("b", named);
  std::vector<Tensor*> params{&x};
  for (auto& [name, t] : named) params.push_back(t);
  const double omega = 6.0;
  const double err = finite_diff_check(
      [&](Tape& tape) {
        Var out = block.forward(tape, tape.parameter(x), std::span<const double>(&omega, 1));
        return ops::sum(ops::mul(out, out));
      },
      params);
  CHECK(err < 1e-5);
}

TEST_CASE("layer construction rejects inconsistent shapes") {
  CHECK_THROWS_AS(HyperLayer(DenseLayer{Tensor({2, 3}), Tensor({3}), ActivationKind::kNone},
                             std::nullopt),
                  ConfigError);
  CHECK_THROWS_AS(HyperLayer(Conv2dLayer{Tensor({2, 1, 3, 2}), Tensor({2}), 1, 1, 1,
                                         ActivationKind::kNone},
                             std::nullopt),
                  ConfigError);
  Rng rng(2);
  CHECK_THROWS_AS(HyperLayer(DenseLayer::init(3, 4, ActivationKind::kNone, rng),
                             HyperScale::identity(3, kMap)),
                  ConfigError);
}
