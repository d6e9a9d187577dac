#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hajscc/errors.hpp"
#include "hajscc/gradcheck.hpp"
#include "hajscc/metrics.hpp"
#include "hajscc/ops.hpp"
#include "hajscc/training.hpp"

using namespace hajscc;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

std::vector<std::vector<double>> snapshot(HyperAJSCCModel& m) {
  std::vector<std::vector<double>> out;
  for (auto& [name, t] : m.parameters()) out.push_back(t->values());
  return out;
}

Dataset blobs(std::size_t n, std::uint64_t seed) {
  return synthetic_dataset(SyntheticKind::kBlobImages, n, {3, 8, 8}, 0, seed);
}

}  // namespace

TEST_CASE("mse loss examples and gradient") {
  Tape tape;
  Var x = tape.constant(Tensor({2}, {0.0, 0.0}));
  CHECK(mse_loss(x, x).value().item() == 0.0);
  CHECK(mse_loss(x, tape.constant(Tensor({2}, {1.0, 1.0}))).value().item() == 1.0);
  CHECK_THROWS_AS(mse_loss(x, tape.constant(Tensor({3}))), DimensionError);

  Rng rng(1);
  const Tensor target = random_tensor({3, 4}, rng);
  Tensor pred = random_tensor({3, 4}, rng);
  pred.set_requires_grad(true);
  Tape t2;
  t2.backward(mse_loss(t2.constant(target), t2.parameter(pred)));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    CHECK(pred.grad()[i] == doctest::Approx(2.0 * (pred[i] - target[i]) / 12.0).epsilon(1e-14));
  }
  Tensor* params[] = {&pred};
  const double err = finite_diff_check(
      [&](Tape& t) { return mse_loss(t.constant(target), t.parameter(pred)); }, params);
  CHECK(err < 1e-6);
}

TEST_CASE("cross-entropy examples") {
  Tape tape;
  std::vector<int> zero{0};
  CHECK(cross_entropy_loss(tape.constant(Tensor({1, 2}, {1.0, 0.0})), zero).value().item() == 0.0);
  CHECK(cross_entropy_loss(tape.constant(Tensor({1, 2}, {0.0, 1.0})), zero).value().item() ==
        doctest::Approx(-std::log(kProbabilityFloor)).epsilon(1e-12));
  std::vector<int> labels{3, 7};
  CHECK(cross_entropy_loss(tape.constant(Tensor({2, 10}, 0.1)), labels).value().item() ==
        doctest::Approx(2.302585092994046).epsilon(1e-14));
  CHECK(cross_entropy_loss(tape.constant(Tensor({1, 2}, {0.75, 0.25})), zero).value().item() ==
        doctest::Approx(0.2876820724517809).epsilon(1e-14));
  std::vector<int> bad{2};
  CHECK_THROWS_AS(cross_entropy_loss(tape.constant(Tensor({1, 2}, {0.5, 0.5})), bad),
                  ContractError);
  std::vector<int> neg{-1};
  CHECK_THROWS_AS(cross_entropy_loss(tape.constant(Tensor({1, 2}, {0.5, 0.5})), neg),
                  ContractError);
}

TEST_CASE("adam first step closed form") {
  Tensor p({1}, {0.5});
  p.set_requires_grad(true);
  p.ensure_grad()[0] = 1.0;
  OptimizerState state;
  Tensor* params[] = {&p};
  const AdamConfig cfg;
  adam_update(state, params, cfg);
  const double delta = p[0] - 0.5;
  CHECK(delta == doctest::Approx(-cfg.lr / (1.0 + cfg.eps)).epsilon(1e-12));
  CHECK(std::abs(delta - -0.000999999995) < 1e-11);
  CHECK(state.m[0][0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(state.v[0][0] == doctest::Approx(0.001).epsilon(1e-15));

  // Second identical gradient: moments accumulate geometrically.
  adam_update(state, params, cfg);
  CHECK(state.step == 2);
  CHECK(state.m[0][0] == doctest::Approx(0.9 * 0.1 + 0.1).epsilon(1e-15));
  CHECK(state.v[0][0] == doctest::Approx(0.999 * 0.001 + 0.001).epsilon(1e-15));
  const double mh = 0.19 / (1.0 - 0.81), vh = 0.001999 / (1.0 - 0.999 * 0.999);
  CHECK(p[0] - 0.5 == doctest::Approx(delta - cfg.lr * mh / (std::sqrt(vh) + cfg.eps)).epsilon(1e-12));
}

TEST_CASE("adam leaves parameters alone on a zero gradient") {
  Rng rng(2);
  Tensor p = random_tensor({4, 3}, rng);
  const auto before = p.values();
  p.ensure_grad();
  OptimizerState state;
  Tensor* params[] = {&p};
  for (int i = 0; i < 5; ++i) adam_update(state, params, AdamConfig{});
  CHECK(p.values() == before);
  CHECK(state.m[0].size() == p.size());
  CHECK(state.v[0].size() == p.size());
}

TEST_CASE("adam converges on a convex quadratic") {
  Rng rng(3);
  const Tensor target = random_tensor({6}, rng);
  Tensor p({6}, 0.0);
  p.set_requires_grad(true);
  Tensor* params[] = {&p};
  OptimizerState state;
  AdamConfig cfg;
  cfg.lr = 0.01;
  std::size_t steps = 0;
  double dist = 1.0;
  while (steps < 5000 && dist > 1e-6) {
    p.zero_grad();
    Tape tape;
    Var d = ops::sub(tape.parameter(p), tape.constant(target));
    tape.backward(ops::sum(ops::mul(d, d)));
    adam_update(state, params, cfg);
    ++steps;
    dist = 0.0;
    for (std::size_t i = 0; i < 6; ++i) dist = std::max(dist, std::abs(p[i] - target[i]));
  }
  MESSAGE("converged in " << steps << " steps");
  CHECK(dist <= 1e-6);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.adam.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  HyperAJSCCModel m = build_model(default_reconstruction_config({3, 8, 8}, 8, 4), 1);
  const auto before = snapshot(m);
  const Dataset data = blobs(8, 1);
  std::vector<std::size_t> idx(8);
  std::iota(idx.begin(), idx.end(), 0);
  Batch batch{data.gather(idx), {}};
  std::vector<double> omegas(8, 5.0);
  OptimizerState opt;
  AdamConfig adam;
  adam.lr = 0.0;
  Rng noise(1);
  const double loss = train_step(m, batch, omegas, opt, adam, LossKind::kMse, noise);
  CHECK(std::isfinite(loss));
  CHECK(snapshot(m) == before);
  std::vector<double> short_omegas(3, 5.0);
  CHECK_THROWS_AS(train_step(m, batch, short_omegas, opt, adam, LossKind::kMse, noise),
                  ContractError);
}

TEST_CASE("single-sample noiseless loss matches a hand computation") {
  ModelConfig cfg;
  cfg.input_shape = {1, 1, 2};
  cfg.bandwidth = 1;
  cfg.encoder = {LayerSpec::parse("dense out=2")};
  cfg.decoder = {LayerSpec::parse("dense out=2 act=tanh"), LayerSpec::parse("reshape 1x1x2")};
  HyperAJSCCModel m = build_model(cfg, 4);
  auto params = m.parameters();
  const Tensor& W1 = *params[0].second;
  const Tensor& W2 = *params[4].second;
  REQUIRE(params[4].first == "dec.0.W0");

  const double x[2] = {0.3, -0.7};
  double z[2];
  for (int i = 0; i < 2; ++i) z[i] = W1[i * 2] * x[0] + W1[i * 2 + 1] * x[1];
  const double norm = std::sqrt(z[0] * z[0] + z[1] * z[1]);
  for (double& v : z) v /= norm;
  double loss = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double y = std::tanh(W2[i * 2] * z[0] + W2[i * 2 + 1] * z[1]);
    loss += (y - x[i]) * (y - x[i]) / 2.0;
  }
  Batch batch{Tensor({1, 1, 1, 2}, {x[0], x[1]}), {}};
  std::vector<double> omegas{40.0};
  Rng noise(1);
  CHECK(batch_loss(m, batch, omegas, LossKind::kMse, noise) == doctest::Approx(loss).epsilon(1e-13));
}

TEST_CASE("memorizing a fixed batch drives the loss down") {
  HyperAJSCCModel m = build_model(default_reconstruction_config({3, 8, 8}, 8, 8), 5);
  const Dataset data = blobs(16, 2);
  std::vector<std::size_t> idx(16);
  std::iota(idx.begin(), idx.end(), 0);
  Batch batch{data.gather(idx), {}};
  std::vector<double> omegas(16, 40.0);
  OptimizerState opt;
  AdamConfig adam;
  adam.lr = 3e-3;
  Rng noise(1);
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    losses.push_back(train_step(m, batch, omegas, opt, adam, LossKind::kMse, noise));
  }
  int decreases = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) decreases += losses[i] < losses[i - 1];
  MESSAGE("decreasing steps " << decreases << "/49, loss " << losses.front() << " -> "
                              << losses.back());
  CHECK(decreases >= 45);
  CHECK(losses.back() < 0.5 * losses.front());
}

TEST_CASE("Monte-Carlo objective estimate settles with more draws") {
  HyperAJSCCModel m = build_model(default_reconstruction_config({3, 8, 8}, 8, 4), 6);
  const Dataset data = blobs(4, 3);
  std::vector<std::size_t> idx{0, 1, 2, 3};
  Batch batch{data.gather(idx), {}};
  Rng snr_rng(7), noise(8);
  const SnrPrior prior = SnrPrior::uniform(0.0, 20.0);
  std::vector<double> draws;
  for (int i = 0; i < 3200; ++i) {
    std::vector<double> omegas(4);
    for (double& w : omegas) w = sample_snr(prior, snr_rng);
    draws.push_back(batch_loss(m, batch, omegas, LossKind::kMse, noise));
  }
  // Spread of block means for blocks of 50 and of 200 draws.
  auto block_spread = [&](std::size_t block) {
    std::vector<double> means;
    for (std::size_t s = 0; s + block <= draws.size(); s += block) {
      means.push_back(std::accumulate(draws.begin() + s, draws.begin() + s + block, 0.0) / block);
    }
    const double mu = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
    double var = 0.0;
    for (double v : means) var += (v - mu) * (v - mu);
    return std::sqrt(var / double(means.size() - 1));
  };
  const double ratio = block_spread(50) / block_spread(200);
  MESSAGE("block-mean spread ratio " << ratio << " (1/sqrt scaling predicts 2)");
  CHECK(ratio > 1.3);
  CHECK(ratio < 3.0);
}

TEST_CASE("training is deterministic given the seed") {
  const ModelConfig mc = default_reconstruction_config({3, 8, 8}, 8, 4);
  const Dataset data = blobs(64, 4);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 11;
  HyperAJSCCModel a = build_model(mc, tc.seed), b = build_model(mc, tc.seed);
  const TrainLog la = train(a, data, &data, tc);
  const TrainLog lb = train(b, data, &data, tc);
  CHECK(snapshot(a) == snapshot(b));
  CHECK(la.epochs.size() == 2);
  CHECK(la.steps == 8);
  CHECK(la.epochs[1].val_metric == lb.epochs[1].val_metric);
  CHECK(la.epochs[1].val_metric.size() == tc.val_grid.size());

  tc.seed = 12;
  HyperAJSCCModel c = build_model(mc, 11);
  train(c, data, nullptr, tc);
  CHECK(snapshot(c) != snapshot(a));
}

TEST_CASE("point-mass prior without hyper scales is a fixed-SNR training loop") {
  ModelConfig mc = default_reconstruction_config({3, 8, 8}, 8, 4);
  mc.hyper = false;
  const Dataset data = blobs(40, 5);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 3;
  tc.prior = SnrPrior::fixed(7.0);
  HyperAJSCCModel a = build_model(mc, 1);
  train(a, data, nullptr, tc);

  // The conventional loop: one SNR for the whole batch.
  HyperAJSCCModel b = build_model(mc, 1);
  OptimizerState opt;
  Rng noise(derive_seed(tc.seed, stream::kNoise));
  const double w = 7.0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    for (const auto& idx : batches(data, tc.batch_size, tc.seed, epoch)) {
      auto params = b.parameters();
      std::vector<Tensor*> ptrs;
      for (auto& [name, p] : params) {
        p->zero_grad();
        ptrs.push_back(p);
      }
      Tape tape;
      Var x = tape.constant(data.gather(idx));
      PipelineOutput out = b.forward_pipeline(tape, x, std::span<const double>(&w, 1), noise);
      tape.backward(mse_loss(x, out.output));
      adam_update(opt, ptrs, tc.adam);
    }
  }
  CHECK(snapshot(a) == snapshot(b));
}

TEST_CASE("training aborts on a non-finite loss") {
  HyperAJSCCModel m = build_model(default_reconstruction_config({3, 8, 8}, 8, 4), 1);
  Dataset data = blobs(8, 6);
  data.samples[5] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  CHECK_THROWS_WITH_AS(train(m, data, nullptr, tc), doctest::Contains("epoch 1 step 1"),
                       NumericError);
}

TEST_CASE("training on blobs beats the untrained model by more than 5 dB") {
  const ModelConfig mc = default_reconstruction_config({3, 8, 8}, 8, 8);
  const Dataset train_set = blobs(1024, 7);
  const Dataset val = blobs(128, 8);
  HyperAJSCCModel m = build_model(mc, 2);
  Rng r0(1);
  const double before = evaluate(m, val, 10.0, r0);
  TrainConfig tc;
  tc.epochs = 32;
  tc.batch_size = 16;
  tc.val_every = 0;
  const TrainLog log = train(m, train_set, nullptr, tc);
  CHECK(log.steps == 2048);
  Rng r1(1);
  const double after = evaluate(m, val, 10.0, r1);
  MESSAGE("PSNR at 10 dB: untrained " << before << ", trained " << after);
  CHECK(after - before > 5.0);
}

TEST_CASE("train log CSV layout") {
  TrainLog log;
  log.val_grid = {1, 4};
  log.metric = "psnr";
  log.epochs.push_back({1, 0.5, {10.0, 12.5}});
  log.epochs.push_back({2, 0.25, {}});
  std::ostringstream out;
  log.write_csv(out);
  CHECK(out.str() ==
        "epoch,loss,val_psnr_1dB,val_psnr_4dB\n1,0.5000000000,10.000000,12.500000\n"
        "2,0.2500000000,,\n");
}
