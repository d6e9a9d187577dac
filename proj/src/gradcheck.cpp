#include "hajscc/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "hajscc/channel.hpp"
#include "hajscc/errors.hpp"
#include "hajscc/layers.hpp"
#include "hajscc/ops.hpp"
#include "hajscc/training.hpp"

namespace hajscc {

double finite_diff_check(const std::function<Var(Tape&)>& f, std::span<Tensor* const> params,
                         double h, FiniteDiffWorst* worst_at, Stencil stencil) {
  if (!(h > 0.0)) throw ContractError("finite_diff_check: step must be positive");
  for (Tensor* p : params) {
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Tape tape;
    tape.backward(f(tape));
  }
  auto eval = [&]() {
    Tape tape;
    return f(tape).value().item();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor* p = params[i];
    auto w = p->data();
    const auto g = p->grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double saved = w[k];
      auto at = [&](double offset) {
        w[k] = saved + offset;
        return eval();
      };
      double numeric = 0.0;
      if (stencil == Stencil::kCentral2) {
        numeric = (at(h) - at(-h)) / (2.0 * h);
      } else {
        numeric = (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
      }
      w[k] = saved;
      const double analytic = g[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > worst) {
        worst = rel;
        if (worst_at) *worst_at = {i, k, analytic, numeric};
      }
    }
  }
  return worst;
}

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

std::string GradcheckReport::format() const {
  std::string out;
  std::size_t ok = 0;
  for (const auto& e : entries) {
    out += fmt::format("{:<4} {:<30} {}-point cases={:<4} max_rel_err={:.3e}\n",
                       e.passed ? "ok" : "FAIL", e.name, e.stencil == Stencil::kCentral2 ? 2 : 5,
                       e.cases, e.max_rel_error);
    if (!e.passed) {
      out += fmt::format("     worst: case {}, tensor {}, index {}: analytic {:.10e} numeric {:.10e}\n",
                         e.worst_case, e.worst.param, e.worst.index, e.worst.analytic,
                         e.worst.numeric);
    }
    ok += e.passed;
  }
  out += fmt::format("gradcheck: {}/{} entries within {:g} ({:.1f} s)\n", ok, entries.size(),
                     tolerance, seconds);
  return out;
}

ModelConfig toy_reconstruction_config(bool hyper) {
  ModelConfig cfg;
  cfg.task = Task::kReconstruction;
  cfg.input_shape = {1, 4, 4};
  cfg.bandwidth = 4;
  cfg.hyper = hyper;
  // A single latent channel would make its hyper scale invisible through
  // power normalization (an exactly-zero gradient), so use two.
  cfg.encoder = {LayerSpec::parse("conv out=2 k=4 s=2 p=1 act=tanh"),
                 LayerSpec::parse("conv out=2 k=3 s=1 p=1 act=none")};
  cfg.decoder = {LayerSpec::parse("reshape 2x2x2"),
                 LayerSpec::parse("deconv out=2 k=3 s=2 p=1 act=tanh"),
                 LayerSpec::parse("conv out=1 k=3 s=1 p=1 act=tanh")};
  return cfg;
}

ModelConfig toy_classification_config(bool hyper) {
  ModelConfig cfg;
  cfg.task = Task::kClassification;
  cfg.input_shape = {1, 4, 4};
  cfg.bandwidth = 2;
  cfg.num_classes = 2;
  cfg.hyper = hyper;
  cfg.encoder = {LayerSpec::parse("conv out=2 k=4 s=2 p=1 act=sigmoid"),
                 LayerSpec::parse("resblock out=2 k=3 s=1 act=tanh"),
                 LayerSpec::parse("dense out=4 act=none")};
  cfg.decoder = {LayerSpec::parse("dense out=2 act=softmax")};
  return cfg;
}

namespace {

using Inputs = std::vector<Var>;
using OpFn = std::function<Var(Tape&, const Inputs&)>;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

// Magnitudes in [0.2, 1] with random sign, to stay clear of relu's kink.
Tensor off_kink_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.data()) v = (rng() & 1 ? 1.0 : -1.0) * uniform(rng, 0.2, 1.0);
  return t;
}

struct Limits {
  std::size_t dim;    // max generic dimension
  std::size_t batch;  // max batch
  std::size_t chan;   // max channels
  double step = 1e-5;
  Stencil stencil = Stencil::kCentral2;
  FiniteDiffWorst* worst = nullptr;
};

// Checks d/d(inputs) of sum(w * op(inputs)) for a fixed random weighting w,
// which exercises every output coordinate of the op.
double check_weighted(std::vector<Tensor>& inputs, const OpFn& op, Rng& rng, const Limits& L) {
  const std::uint64_t wseed = rng();
  Tensor w;
  auto f = [&](Tape& tape) {
    Inputs vars;
    for (Tensor& t : inputs) vars.push_back(tape.parameter(t));
    Var out = op(tape, vars);
    if (w.empty()) {
      Rng wr(wseed);
      w = random_tensor(out.shape(), wr, 0.5, 1.5);
      for (double& v : w.data()) v *= (wr() & 1) ? 1.0 : -1.0;
    }
    return ops::sum(ops::mul(out, tape.constant(w)));
  };
  std::vector<Tensor*> ptrs;
  for (Tensor& t : inputs) ptrs.push_back(&t);
  return finite_diff_check(f, ptrs, L.step, L.worst, L.stencil);
}

double check_params(NamedParams& named, std::vector<Tensor>& extra,
                    const std::function<Var(Tape&, const Inputs&)>& op, Rng& rng,
                    const Limits& L) {
  const std::uint64_t wseed = rng();
  Tensor w;
  auto f = [&](Tape& tape) {
    Inputs vars;
    for (Tensor& t : extra) vars.push_back(tape.parameter(t));
    Var out = op(tape, vars);
    if (w.empty()) {
      Rng wr(wseed);
      w = random_tensor(out.shape(), wr, -1.0, 1.0);
    }
    return ops::sum(ops::mul(out, tape.constant(w)));
  };
  std::vector<Tensor*> ptrs;
  for (auto& [name, t] : named) ptrs.push_back(t);
  for (Tensor& t : extra) ptrs.push_back(&t);
  return finite_diff_check(f, ptrs, L.step, L.worst, L.stencil);
}

void randomize_scale(std::optional<HyperScale>& s, Rng& rng) {
  if (!s) return;
  for (double& v : s->nu.data()) v = uniform(rng, -0.5, 0.5);
  for (double& v : s->c.data()) v = uniform(rng, 0.5, 1.5);
}

void randomize_bias(Tensor& b, Rng& rng) {
  for (double& v : b.data()) v = uniform(rng, -0.3, 0.3);
}

std::vector<double> random_omegas(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (double& v : w) v = uniform(rng, 0.0, 20.0);
  return w;
}

ActivationKind smooth_act(Rng& rng) {
  const ActivationKind kinds[] = {ActivationKind::kNone, ActivationKind::kTanh,
                                  ActivationKind::kSigmoid};
  return kinds[pick(rng, 0, 2)];
}

using CaseFn = std::function<double(Rng&, const Limits&)>;

struct SuiteEntry {
  std::string name;
  CaseFn run;
  Stencil stencil = Stencil::kCentral2;
};

Var corrupted_tanh(Var x) {
  Tensor y = x.value();
  for (double& v : y.data()) v = std::tanh(v);
  return x.tape->record(std::move(y), {x.id}, [](GradContext& g) {
    for (std::size_t i = 0; i < g.out.size(); ++i) {
      const double t = g.out[i];
      g.in_grad[0][i] += 1.01 * g.out_grad[i] * (1.0 - t * t);
    }
  });
}

double conv_case(Rng& rng, const Limits& L) {
  const std::size_t k = pick(rng, 0, 1) ? 3 : 1;
  const std::size_t stride = pick(rng, 1, 2);
  const std::size_t out_hw = pick(rng, 1, std::min<std::size_t>(3, L.dim));
  std::size_t pad = k == 3 ? pick(rng, 0, 1) : 0;
  if ((out_hw - 1) * stride + k <= 2 * pad) pad = 0;
  const std::size_t H = (out_hw - 1) * stride + k - 2 * pad;
  const std::size_t B = pick(rng, 1, L.batch), Ci = pick(rng, 1, L.chan), Co = pick(rng, 1, L.chan);
  std::vector<Tensor> in{random_tensor({B, Ci, H, H}, rng), random_tensor({Co, Ci, k, k}, rng),
                         random_tensor({Co}, rng)};
  return check_weighted(
      in, [&](Tape&, const Inputs& v) { return ops::conv2d(v[0], v[1], v[2], stride, pad); }, rng, L);
}

std::vector<SuiteEntry> build_suite(bool inject_fault) {
  std::vector<SuiteEntry> s;
  auto add = [&](std::string name, CaseFn fn, Stencil stencil = Stencil::kCentral2) {
    s.push_back({std::move(name), std::move(fn), stencil});
  };

  add("matmul", [](Rng& rng, const Limits& L) {
    const std::size_t m = pick(rng, 1, L.dim), k = pick(rng, 1, L.dim), n = pick(rng, 1, L.dim);
    std::vector<Tensor> in{random_tensor({m, k}, rng), random_tensor({k, n}, rng)};
    return check_weighted(in, [](Tape&, const Inputs& v) { return ops::matmul(v[0], v[1]); }, rng, L);
  });
  add("transpose", [](Rng& rng, const Limits& L) {
    std::vector<Tensor> in{random_tensor({pick(rng, 1, L.dim), pick(rng, 1, L.dim)}, rng)};
    return check_weighted(in, [](Tape&, const Inputs& v) { return ops::transpose(v[0]); }, rng, L);
  });
  for (auto kind : {ops::ElementwiseKind::kAdd, ops::ElementwiseKind::kSub,
                    ops::ElementwiseKind::kMul}) {
    const char* name = kind == ops::ElementwiseKind::kAdd   ? "add"
                       : kind == ops::ElementwiseKind::kSub ? "sub"
                                                             : "mul";
    add(name, [kind](Rng& rng, const Limits& L) {
      Shape shape(pick(rng, 1, 3));
      for (auto& d : shape) d = pick(rng, 1, L.dim);
      std::vector<Tensor> in{random_tensor(shape, rng), random_tensor(shape, rng)};
      return check_weighted(
          in, [kind](Tape&, const Inputs& v) { return ops::elementwise(kind, v[0], v[1]); }, rng, L);
    });
  }
  add("scale_rows", [](Rng& rng, const Limits& L) {
    const std::size_t r = pick(rng, 1, L.dim);
    std::vector<Tensor> in{random_tensor({r, pick(rng, 1, L.dim), pick(rng, 1, 2)}, rng),
                           random_tensor({r}, rng)};
    return check_weighted(in, [](Tape&, const Inputs& v) { return ops::scale_rows(v[0], v[1]); },
                          rng, L);
  });
  add("scale", [](Rng& rng, const Limits& L) {
    const double alpha = uniform(rng, -2.0, 2.0);
    std::vector<Tensor> in{random_tensor({pick(rng, 1, L.dim), pick(rng, 1, L.dim)}, rng)};
    return check_weighted(in, [alpha](Tape&, const Inputs& v) { return ops::scale(v[0], alpha); },
                          rng, L);
  });
  add("add_bias", [](Rng& rng, const Limits& L) {
    const std::size_t D = pick(rng, 1, L.dim);
    std::vector<Tensor> in{random_tensor({pick(rng, 1, L.batch), D}, rng), random_tensor({D}, rng)};
    return check_weighted(in, [](Tape&, const Inputs& v) { return ops::add_bias(v[0], v[1]); },
                          rng, L);
  });
  add("channel_scale", [](Rng& rng, const Limits& L) {
    const std::size_t B = pick(rng, 1, L.batch), C = pick(rng, 1, L.chan);
    std::vector<Tensor> in{random_tensor({B, C, pick(rng, 1, L.dim), pick(rng, 1, L.dim)}, rng),
                           random_tensor({B, C}, rng)};
    return check_weighted(
        in, [](Tape&, const Inputs& v) { return ops::channel_scale(v[0], v[1]); }, rng, L);
  });
  add("hyper_scale", [](Rng& rng, const Limits& L) {
    const std::size_t C = pick(rng, 1, L.chan);
    std::vector<double> omega(pick(rng, 1, L.batch));
    for (double& w : omega) w = uniform(rng, -1.0, 1.0);
    std::vector<Tensor> in{random_tensor({C}, rng), random_tensor({C}, rng)};
    return check_weighted(
        in, [&omega](Tape&, const Inputs& v) { return ops::hyper_scale(v[0], v[1], omega); },
        rng, L);
  });
  add("conv2d", conv_case);
  add("upsample_zeros", [](Rng& rng, const Limits& L) {
    const std::size_t f = pick(rng, 1, 3);
    std::vector<Tensor> in{random_tensor(
        {pick(rng, 1, L.batch), pick(rng, 1, L.chan), pick(rng, 1, 3), pick(rng, 1, 3)}, rng)};
    return check_weighted(in, [f](Tape&, const Inputs& v) { return ops::upsample_zeros(v[0], f); },
                          rng, L);
  });
  add("reshape", [](Rng& rng, const Limits& L) {
    const std::size_t a = pick(rng, 1, L.dim), b = pick(rng, 1, L.dim);
    std::vector<Tensor> in{random_tensor({a, b}, rng)};
    return check_weighted(in, [a, b](Tape&, const Inputs& v) { return ops::reshape(v[0], {b, a}); },
                          rng, L);
  });
  for (auto kind : {ActivationKind::kRelu, ActivationKind::kTanh, ActivationKind::kSigmoid,
                    ActivationKind::kSoftmax}) {
    add(std::string(ops::activation_name(kind)), [kind](Rng& rng, const Limits& L) {
      const Shape shape{pick(rng, 1, L.batch), pick(rng, 1, L.dim)};
      std::vector<Tensor> in{kind == ActivationKind::kRelu ? off_kink_tensor(shape, rng)
                                                           : random_tensor(shape, rng, -2.0, 2.0)};
      return check_weighted(
          in, [kind](Tape&, const Inputs& v) { return ops::activation(kind, v[0]); }, rng, L);
    });
  }
  add("sum", [](Rng& rng, const Limits& L) {
    std::vector<Tensor> in{random_tensor({pick(rng, 1, L.dim), pick(rng, 1, L.dim)}, rng)};
    return check_weighted(in, [](Tape&, const Inputs& v) { return ops::sum(v[0]); }, rng, L);
  });
  add("mean", [](Rng& rng, const Limits& L) {
    std::vector<Tensor> in{random_tensor({pick(rng, 1, L.dim), pick(rng, 1, L.dim)}, rng)};
    return check_weighted(in, [](Tape&, const Inputs& v) { return ops::mean(v[0]); }, rng, L);
  });
  add("power_normalize", [](Rng& rng, const Limits& L) {
    std::vector<Tensor> in{off_kink_tensor({pick(rng, 1, L.batch), 2 * pick(rng, 1, L.dim)}, rng)};
    return check_weighted(
        in, [](Tape&, const Inputs& v) { return power_normalize(v[0]).values; }, rng, L);
  });
  add("awgn_channel", [](Rng& rng, const Limits& L) {
    const std::size_t B = pick(rng, 1, L.batch), d = pick(rng, 1, L.dim);
    std::vector<ChannelDraw> draws;
    for (std::size_t i = 0; i < B; ++i) draws.push_back(ChannelDraw::at(uniform(rng, 0.0, 20.0)));
    const std::uint64_t noise_seed = rng();
    std::vector<Tensor> in{off_kink_tensor({B, 2 * d}, rng)};
    return check_weighted(
        in,
        [&](Tape&, const Inputs& v) {
          Rng noise(noise_seed);
          return awgn_transmit(power_normalize(v[0]), draws, noise);
        },
        rng, L);
  });
  add("mse_loss", [](Rng& rng, const Limits& L) {
    const Shape shape{pick(rng, 1, L.batch), pick(rng, 1, L.dim)};
    std::vector<Tensor> in{random_tensor(shape, rng), random_tensor(shape, rng)};
    return check_weighted(in, [](Tape&, const Inputs& v) { return mse_loss(v[0], v[1]); }, rng, L);
  });
  add("cross_entropy_loss", [](Rng& rng, const Limits& L) {
    const std::size_t B = pick(rng, 1, L.batch), K = pick(rng, 2, std::max<std::size_t>(2, L.dim));
    std::vector<int> labels(B);
    for (int& y : labels) y = int(pick(rng, 0, K - 1));
    std::vector<Tensor> in{random_tensor({B, K}, rng, 0.05, 1.0)};
    return check_weighted(
        in, [&labels](Tape&, const Inputs& v) { return cross_entropy_loss(v[0], labels); }, rng, L);
  });

  add("hyper_dense", [](Rng& rng, const Limits& L) {
    const std::size_t in_f = pick(rng, 1, L.dim), out_f = pick(rng, 1, L.dim);
    const std::size_t B = pick(rng, 1, L.batch);
    HyperLayer layer(DenseLayer::init(in_f, out_f, smooth_act(rng), rng),
                     HyperScale::identity(out_f, OmegaMap::from_range(0, 20)));
    randomize_scale(layer.scale(), rng);
    randomize_bias(layer.dense().b0, rng);
    const auto omega = random_omegas(B, rng);
    NamedParams named;
    layer.collect("dense", named);
    std::vector<Tensor> x{random_tensor({B, in_f}, rng)};
    return check_params(
        named, x, [&](Tape& t, const Inputs& v) { return layer.forward(t, v[0], omega); }, rng, L);
  });
  add("hyper_conv", [](Rng& rng, const Limits& L) {
    const std::size_t Ci = pick(rng, 1, L.chan), Co = pick(rng, 1, L.chan);
    const std::size_t B = pick(rng, 1, L.batch), stride = pick(rng, 1, 2);
    const std::size_t H = stride == 2 ? 2 * pick(rng, 1, 2) + 1 : pick(rng, 2, 4);
    HyperLayer layer(Conv2dLayer::init(Ci, Co, 3, stride, 1, 1, smooth_act(rng), rng),
                     HyperScale::identity(Co, OmegaMap::from_range(0, 20)));
    randomize_scale(layer.scale(), rng);
    randomize_bias(layer.conv().b0, rng);
    const auto omega = random_omegas(B, rng);
    NamedParams named;
    layer.collect("conv", named);
    std::vector<Tensor> x{random_tensor({B, Ci, H, H}, rng)};
    return check_params(
        named, x, [&](Tape& t, const Inputs& v) { return layer.forward(t, v[0], omega); }, rng, L);
  });
  add("hyper_deconv", [](Rng& rng, const Limits& L) {
    const std::size_t Ci = pick(rng, 1, L.chan), Co = pick(rng, 1, L.chan);
    const std::size_t B = pick(rng, 1, L.batch), H = pick(rng, 1, 3);
    HyperLayer layer(Conv2dLayer::init(Ci, Co, 3, 1, 1, 2, smooth_act(rng), rng),
                     HyperScale::identity(Co, OmegaMap::from_range(0, 20)));
    randomize_scale(layer.scale(), rng);
    randomize_bias(layer.conv().b0, rng);
    const auto omega = random_omegas(B, rng);
    NamedParams named;
    layer.collect("deconv", named);
    std::vector<Tensor> x{random_tensor({B, Ci, H, H}, rng)};
    return check_params(
        named, x, [&](Tape& t, const Inputs& v) { return layer.forward(t, v[0], omega); }, rng, L);
  });
  add("residual_block", [](Rng& rng, const Limits& L) {
    const std::size_t Ci = pick(rng, 1, L.chan), B = pick(rng, 1, L.batch);
    const bool project = pick(rng, 0, 1);
    const std::size_t Co = project ? pick(rng, 1, L.chan) : Ci;
    const std::size_t stride = project ? pick(rng, 1, 2) : 1;
    const std::size_t H = stride == 2 ? 2 * pick(rng, 1, 2) + 1 : pick(rng, 2, 4);
    const OmegaMap map = OmegaMap::from_range(0, 20);
    auto conv = [&](std::size_t in, std::size_t out, std::size_t k, std::size_t s, std::size_t p) {
      HyperLayer l(Conv2dLayer::init(in, out, k, s, p, 1, ActivationKind::kNone, rng),
                   HyperScale::identity(out, map));
      randomize_scale(l.scale(), rng);
      randomize_bias(l.conv().b0, rng);
      return l;
    };
    HyperLayer c1 = conv(Ci, Co, 3, stride, 1);
    HyperLayer c2 = conv(Co, Co, 3, 1, 1);
    std::optional<HyperLayer> proj;
    if (project) proj = conv(Ci, Co, 1, stride, 0);
    ResidualBlock block(std::move(c1), std::move(c2), std::move(proj), ActivationKind::kTanh);
    const auto omega = random_omegas(B, rng);
    NamedParams named;
    block.collect("res", named);
    std::vector<Tensor> x{random_tensor({B, Ci, H, H}, rng)};
    return check_params(
        named, x, [&](Tape& t, const Inputs& v) { return block.forward(t, v[0], omega); }, rng, L);
  });
  add("materialize_conv", [](Rng& rng, const Limits& L) {
    const std::size_t Ci = pick(rng, 1, L.chan), Co = pick(rng, 1, L.chan);
    HyperLayer layer(Conv2dLayer::init(Ci, Co, 3, 1, 1, 1, ActivationKind::kNone, rng),
                     HyperScale::identity(Co, OmegaMap::from_range(0, 20)));
    randomize_scale(layer.scale(), rng);
    randomize_bias(layer.conv().b0, rng);
    const double omega = uniform(rng, 0.0, 20.0);
    NamedParams named;
    layer.collect("conv", named);
    std::vector<Tensor> none;
    return check_params(
        named, none,
        [&](Tape& t, const Inputs&) {
          auto [k, b] = materialize_conv(t, layer, omega);
          return ops::add(ops::sum(ops::mul(k, k)), ops::sum(b));
        },
        rng, L);
  });

  auto objective = [](bool classify) {
    return [classify](Rng& rng, const Limits& L) {
      const ModelConfig cfg =
          classify ? toy_classification_config(true) : toy_reconstruction_config(true);
      HyperAJSCCModel model = build_model(cfg, rng());
      NamedParams named = model.parameters();
      for (auto& [name, t] : named) {
        if (name.ends_with(".nu")) {
          for (double& v : t->data()) v = uniform(rng, -0.5, 0.5);
        } else if (name.ends_with(".c")) {
          for (double& v : t->data()) v = uniform(rng, 0.5, 1.5);
        } else if (name.ends_with(".b0")) {
          randomize_bias(*t, rng);
        }
      }
      const std::size_t B = pick(rng, 1, L.batch);
      Shape xs{B};
      xs.insert(xs.end(), cfg.input_shape.begin(), cfg.input_shape.end());
      const Tensor x = random_tensor(xs, rng);
      std::vector<int> labels(B);
      for (int& y : labels) y = int(pick(rng, 0, cfg.num_classes ? cfg.num_classes - 1 : 0));
      const auto omega = random_omegas(B, rng);
      const std::uint64_t noise_seed = rng();
      auto f = [&](Tape& tape) {
        Rng noise(noise_seed);
        Var xv = tape.constant(x);
        PipelineOutput out = model.forward_pipeline(tape, xv, omega, noise);
        return classify ? cross_entropy_loss(out.output, labels) : mse_loss(xv, out.output);
      };
      std::vector<Tensor*> ptrs;
      for (auto& [name, t] : named) ptrs.push_back(t);
      return finite_diff_check(f, ptrs, L.step, L.worst, L.stencil);
    };
  };
  add("objective_reconstruction", objective(false), Stencil::kCentral4);
  add("objective_classification", objective(true), Stencil::kCentral4);

  if (inject_fault) {
    add("tanh[corrupted backward]", [](Rng& rng, const Limits& L) {
      std::vector<Tensor> in{random_tensor({pick(rng, 1, L.batch), pick(rng, 1, L.dim)}, rng)};
      return check_weighted(in, [](Tape&, const Inputs& v) { return corrupted_tanh(v[0]); }, rng, L);
    });
  }
  return s;
}

}  // namespace

GradcheckReport run_gradcheck_suite(const GradcheckOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool tiny = options.size == SuiteSize::kTiny;
  Limits limits = tiny ? Limits{2, 2, 2} : Limits{4, 3, 3};
  const std::size_t cases = options.cases ? options.cases : (tiny ? 8 : 100);

  GradcheckReport report;
  report.tolerance = options.tolerance;
  const auto suite = build_suite(options.inject_fault);
  for (std::size_t e = 0; e < suite.size(); ++e) {
    GradcheckEntry entry;
    entry.name = suite[e].name;
    entry.stencil = suite[e].stencil;
    for (std::size_t c = 0; c < cases; ++c) {
      Rng rng(derive_seed(derive_seed(options.seed, e), c));
      FiniteDiffWorst worst;
      limits.worst = &worst;
      limits.stencil = suite[e].stencil;
      limits.step = suite[e].stencil == Stencil::kCentral2 ? options.step : options.objective_step;
      const double err = suite[e].run(rng, limits);
      if (err > entry.max_rel_error || c == 0) {
        entry.max_rel_error = err;
        entry.worst_case = c;
        entry.worst = worst;
      }
      ++entry.cases;
    }
    entry.passed = entry.max_rel_error <= options.tolerance;
    report.entries.push_back(std::move(entry));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace hajscc
