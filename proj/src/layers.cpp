#include "hajscc/layers.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hajscc/errors.hpp"

namespace hajscc {

OmegaMap OmegaMap::from_range(double lo_db, double hi_db) {
  if (!(hi_db > lo_db)) {
    throw ConfigError(fmt::format("omega range [{}, {}] dB is empty", lo_db, hi_db));
  }
  const double gain = 2.0 / (hi_db - lo_db);
  return {gain, -1.0 - gain * lo_db};
}

namespace {

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  t.set_requires_grad(true);
  return t;
}

Tensor trainable(Shape shape, double fill) {
  Tensor t(std::move(shape), fill);
  t.set_requires_grad(true);
  return t;
}

// Expands one-per-batch or one-per-sample SNRs to conditioning values.
std::vector<double> conditioning(const OmegaMap& map, std::span<const double> omega_db,
                                 std::size_t batch) {
  if (omega_db.size() != 1 && omega_db.size() != batch) {
    throw DimensionError(fmt::format("{} SNR values for a batch of {}", omega_db.size(), batch));
  }
  std::vector<double> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out[b] = map(omega_db[omega_db.size() == 1 ? 0 : b]);
  }
  return out;
}

}  // namespace

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, ActivationKind act, Rng& rng) {
  return {he_uniform({out, in}, in, rng), trainable({out}, 0.0), act};
}

Conv2dLayer Conv2dLayer::init(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                              std::size_t stride, std::size_t padding, std::size_t upsample,
                              ActivationKind act, Rng& rng) {
  Conv2dLayer l;
  l.C0 = he_uniform({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng);
  l.b0 = trainable({out_ch}, 0.0);
  l.stride = stride;
  l.padding = padding;
  l.upsample = upsample;
  l.act = act;
  return l;
}

HyperScale HyperScale::identity(std::size_t width, OmegaMap map) {
  return {trainable({width}, 0.0), trainable({width}, 1.0), map};
}

Var hyper_scale_vector(Tape& tape, HyperScale& scale, double omega_db) {
  const double w = scale.omega_map(omega_db);
  Var s = ops::hyper_scale(tape.parameter(scale.nu), tape.parameter(scale.c),
                           std::span<const double>(&w, 1));
  return ops::reshape(s, {scale.nu.size()});
}

HyperLayer::HyperLayer(Base base, std::optional<HyperScale> scale)
    : base_(std::move(base)), scale_(std::move(scale)) {
  if (is_dense()) {
    const auto& d = dense();
    if (d.W0.rank() != 2 || d.b0.rank() != 1 || d.b0.dim(0) != d.W0.dim(0)) {
      throw ConfigError(fmt::format("dense layer weights {} and bias {} disagree",
                                    shape_str(d.W0.shape()), shape_str(d.b0.shape())));
    }
  } else {
    const auto& c = conv();
    if (c.C0.rank() != 4 || c.C0.dim(2) != c.C0.dim(3) || c.C0.dim(2) == 0) {
      throw ConfigError(fmt::format("conv kernels must be [out x in x K x K], got {}",
                                    shape_str(c.C0.shape())));
    }
    if (c.b0.rank() != 1 || c.b0.dim(0) != c.C0.dim(0)) {
      throw ConfigError(fmt::format("conv bias {} does not match kernels {}",
                                    shape_str(c.b0.shape()), shape_str(c.C0.shape())));
    }
    if (c.stride == 0 || c.upsample == 0) throw ConfigError("conv stride/upsample must be positive");
  }
  if (scale_) {
    const std::size_t w = out_channels();
    if (scale_->nu.size() != w || scale_->c.size() != w) {
      throw ConfigError(fmt::format("hyper scale width {}/{} does not match {} output channels",
                                    scale_->nu.size(), scale_->c.size(), w));
    }
  }
}

std::size_t HyperLayer::out_channels() const {
  return is_dense() ? dense().out_features() : conv().out_channels();
}

ActivationKind HyperLayer::activation() const {
  return is_dense() ? dense().act : conv().act;
}

Var HyperLayer::pre_activation(Tape& tape, Var x, std::span<const double> omega_db) {
  Var a;
  if (is_dense()) {
    auto& d = dense();
    if (x.value().rank() != 2) x = ops::reshape(x, {x.shape()[0], x.size() / x.shape()[0]});
    if (x.shape()[1] != d.in_features()) {
      throw DimensionError(fmt::format("dense layer expects width {}, got input {}",
                                       d.in_features(), shape_str(x.shape())));
    }
    a = ops::add_bias(ops::matmul(x, ops::transpose(tape.parameter(d.W0))),
                      tape.parameter(d.b0));
  } else {
    auto& c = conv();
    if (x.value().rank() != 4 || x.shape()[1] != c.in_channels()) {
      throw DimensionError(fmt::format("conv layer expects {} input channels, got input {}",
                                       c.in_channels(), shape_str(x.shape())));
    }
    if (c.upsample > 1) x = ops::upsample_zeros(x, c.upsample);
    a = ops::conv2d(x, tape.parameter(c.C0), tape.parameter(c.b0), c.stride, c.padding);
  }
  if (!scale_) return a;
  const auto w = conditioning(scale_->omega_map, omega_db, a.shape()[0]);
  Var s = ops::hyper_scale(tape.parameter(scale_->nu), tape.parameter(scale_->c), w);
  return ops::channel_scale(a, s);
}

Var HyperLayer::forward(Tape& tape, Var x, std::span<const double> omega_db) {
  return ops::activation(activation(), pre_activation(tape, x, omega_db));
}

Shape HyperLayer::output_shape(const Shape& input) const {
  if (input.empty()) throw DimensionError("empty input shape");
  if (is_dense()) {
    const std::size_t width = shape_size(input) / input[0];
    if (width != dense().in_features()) {
      throw DimensionError(fmt::format("dense layer expects width {}, got input {}",
                                       dense().in_features(), shape_str(input)));
    }
    return {input[0], dense().out_features()};
  }
  const auto& c = conv();
  if (input.size() != 4 || input[1] != c.in_channels()) {
    throw DimensionError(fmt::format("conv layer expects {} input channels, got input {}",
                                     c.in_channels(), shape_str(input)));
  }
  const std::size_t K = c.kernel_size();
  Shape out{input[0], c.out_channels(), 0, 0};
  for (int axis = 2; axis < 4; ++axis) {
    const std::size_t padded = input[axis] * c.upsample + 2 * c.padding;
    if (padded < K || (padded - K) % c.stride != 0) {
      throw ConfigError(fmt::format(
          "conv with kernel {}, stride {}, padding {} gives a non-integral output for input {}",
          K, c.stride, c.padding, shape_str(input)));
    }
    out[axis] = (padded - K) / c.stride + 1;
  }
  return out;
}

ParamCount HyperLayer::param_counts() const {
  ParamCount pc;
  pc.base = is_dense() ? dense().W0.size() + dense().b0.size()
                       : conv().C0.size() + conv().b0.size();
  pc.introduced = scale_ ? 2 * out_channels() : 0;
  return pc;
}

void HyperLayer::collect(const std::string& prefix, NamedParams& out) {
  if (is_dense()) {
    out.emplace_back(prefix + ".W0", &dense().W0);
    out.emplace_back(prefix + ".b0", &dense().b0);
  } else {
    out.emplace_back(prefix + ".C0", &conv().C0);
    out.emplace_back(prefix + ".b0", &conv().b0);
  }
  if (scale_) {
    out.emplace_back(prefix + ".nu", &scale_->nu);
    out.emplace_back(prefix + ".c", &scale_->c);
  }
}

std::pair<Var, Var> materialize_conv(Tape& tape, HyperLayer& layer, double omega_db) {
  auto& c = layer.conv();
  Var kernels = tape.parameter(c.C0);
  Var bias = tape.parameter(c.b0);
  if (!layer.scale()) return {kernels, bias};
  Var s = hyper_scale_vector(tape, *layer.scale(), omega_db);
  return {ops::scale_rows(kernels, s), ops::mul(s, bias)};
}

ResidualBlock::ResidualBlock(HyperLayer conv1, HyperLayer conv2,
                             std::optional<HyperLayer> projection, ActivationKind act)
    : conv1_(std::move(conv1)), conv2_(std::move(conv2)),
      projection_(std::move(projection)), act_(act) {
  if (!conv1_.is_conv() || !conv2_.is_conv() || (projection_ && !projection_->is_conv())) {
    throw ConfigError("residual block layers must be convolutions");
  }
  if (conv2_.conv().in_channels() != conv1_.out_channels()) {
    throw ConfigError("residual block: conv2 input channels must equal conv1 output channels");
  }
  if (projection_ && projection_->out_channels() != conv2_.out_channels()) {
    throw ConfigError("residual block: projection and conv2 output channels differ");
  }
}

Var ResidualBlock::forward(Tape& tape, Var x, std::span<const double> omega_db) {
  Var h = conv1_.forward(tape, x, omega_db);
  Var main = conv2_.pre_activation(tape, h, omega_db);
  Var skip = projection_ ? projection_->pre_activation(tape, x, omega_db) : x;
  if (main.shape() != skip.shape()) {
    throw DimensionError(fmt::format("residual block: main path {} vs skip path {}",
                                     shape_str(main.shape()), shape_str(skip.shape())));
  }
  return ops::activation(act_, ops::add(main, skip));
}

Shape ResidualBlock::output_shape(const Shape& input) const {
  Shape main = conv2_.output_shape(conv1_.output_shape(input));
  Shape skip = projection_ ? projection_->output_shape(input) : input;
  if (main != skip) {
    throw DimensionError(fmt::format("residual block: main path {} vs skip path {}",
                                     shape_str(main), shape_str(skip)));
  }
  return main;
}

ParamCount ResidualBlock::param_counts() const {
  ParamCount pc = conv1_.param_counts();
  pc += conv2_.param_counts();
  if (projection_) pc += projection_->param_counts();
  return pc;
}

void ResidualBlock::collect(const std::string& prefix, NamedParams& out) {
  conv1_.collect(prefix + ".conv1", out);
  conv2_.collect(prefix + ".conv2", out);
  if (projection_) projection_->collect(prefix + ".proj", out);
}

Var stage_forward(Stage& stage, Tape& tape, Var x, std::span<const double> omega_db) {
  if (auto* l = std::get_if<HyperLayer>(&stage)) return l->forward(tape, x, omega_db);
  if (auto* r = std::get_if<ResidualBlock>(&stage)) return r->forward(tape, x, omega_db);
  const auto& target = std::get<ReshapeStage>(stage).target;
  Shape full{x.shape()[0]};
  full.insert(full.end(), target.begin(), target.end());
  return ops::reshape(x, full);
}

Shape stage_output_shape(const Stage& stage, const Shape& input) {
  if (auto* l = std::get_if<HyperLayer>(&stage)) return l->output_shape(input);
  if (auto* r = std::get_if<ResidualBlock>(&stage)) return r->output_shape(input);
  const auto& target = std::get<ReshapeStage>(stage).target;
  Shape full{input[0]};
  full.insert(full.end(), target.begin(), target.end());
  if (shape_size(full) != shape_size(input)) {
    throw DimensionError(fmt::format("cannot reshape {} to {}", shape_str(input), shape_str(full)));
  }
  return full;
}

ParamCount stage_param_counts(const Stage& stage) {
  if (auto* l = std::get_if<HyperLayer>(&stage)) return l->param_counts();
  if (auto* r = std::get_if<ResidualBlock>(&stage)) return r->param_counts();
  return {};
}

void stage_collect(Stage& stage, const std::string& prefix, NamedParams& out) {
  if (auto* l = std::get_if<HyperLayer>(&stage)) l->collect(prefix, out);
  if (auto* r = std::get_if<ResidualBlock>(&stage)) r->collect(prefix, out);
}

}  // namespace hajscc
