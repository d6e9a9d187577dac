#include "hajscc/models.hpp"

#include <sstream>

#include <fmt/format.h>

#include "hajscc/errors.hpp"
#include "hajscc/ops.hpp"

namespace hajscc {

std::string_view task_name(Task task) {
  return task == Task::kReconstruction ? "reconstruction" : "classification";
}

Task parse_task(std::string_view name) {
  if (name == "reconstruction") return Task::kReconstruction;
  if (name == "classification") return Task::kClassification;
  throw ConfigError(fmt::format("unknown task '{}' (reconstruction | classification)", name));
}

namespace {

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty() || value[0] == '-') {
    throw ConfigError(fmt::format("'{}' needs a non-negative integer, got '{}'", key, value));
  }
  return static_cast<std::size_t>(v);
}

Shape parse_dims(const std::string& text) {
  Shape dims;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, 'x')) dims.push_back(parse_size("dims", part));
  if (dims.empty()) throw ConfigError(fmt::format("bad dimension list '{}'", text));
  for (auto d : dims) {
    if (d == 0) throw ConfigError(fmt::format("zero dimension in '{}'", text));
  }
  return dims;
}

std::string kind_name(LayerSpec::Kind kind) {
  switch (kind) {
    case LayerSpec::Kind::kDense: return "dense";
    case LayerSpec::Kind::kConv: return "conv";
    case LayerSpec::Kind::kDeconv: return "deconv";
    case LayerSpec::Kind::kResBlock: return "resblock";
    case LayerSpec::Kind::kReshape: return "reshape";
  }
  return "?";
}

}  // namespace

LayerSpec LayerSpec::parse(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  if (!(in >> kind)) throw ConfigError("empty layer description");
  LayerSpec spec;
  if (kind == "dense") {
    spec.kind = Kind::kDense;
  } else if (kind == "conv") {
    spec.kind = Kind::kConv;
  } else if (kind == "deconv") {
    spec.kind = Kind::kDeconv;
  } else if (kind == "resblock") {
    spec.kind = Kind::kResBlock;
  } else if (kind == "reshape") {
    spec.kind = Kind::kReshape;
    std::string dims, extra;
    if (!(in >> dims) || (in >> extra)) {
      throw ConfigError(fmt::format("reshape takes exactly one CxHxW argument: '{}'", text));
    }
    spec.reshape = parse_dims(dims);
    return spec;
  } else {
    throw ConfigError(fmt::format("unknown layer kind '{}'", kind));
  }
  bool have_padding = false;
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("layer option '{}' is not key=value", token));
    }
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    if (key == "out") {
      spec.out = parse_size(key, value);
    } else if (key == "k") {
      spec.kernel = parse_size(key, value);
    } else if (key == "s") {
      spec.stride = parse_size(key, value);
    } else if (key == "p") {
      spec.padding = parse_size(key, value);
      have_padding = true;
    } else if (key == "act") {
      spec.act = ops::parse_activation(value);
    } else if (key == "hyper") {
      if (value != "0" && value != "1") throw ConfigError("hyper must be 0 or 1");
      spec.hyper = value == "1";
    } else {
      throw ConfigError(fmt::format("unknown layer option '{}'", key));
    }
  }
  if (spec.out == 0) throw ConfigError(fmt::format("layer '{}' needs out=N > 0", text));
  if (spec.kernel == 0 || spec.stride == 0) {
    throw ConfigError(fmt::format("layer '{}' needs positive k and s", text));
  }
  if (spec.kind == Kind::kResBlock) {
    if (have_padding) throw ConfigError("resblock pads to k/2 itself; drop p=");
    if (spec.kernel % 2 == 0) throw ConfigError("resblock kernel must be odd");
  }
  return spec;
}

std::string LayerSpec::describe() const {
  if (kind == Kind::kReshape) return fmt::format("reshape {}", fmt::join(reshape, "x"));
  std::string s = fmt::format("{} out={}", kind_name(kind), out);
  if (kind != Kind::kDense) {
    s += fmt::format(" k={} s={}", kernel, stride);
    if (kind != Kind::kResBlock) s += fmt::format(" p={}", padding);
  }
  s += fmt::format(" act={}", ops::activation_name(act));
  if (hyper) s += fmt::format(" hyper={}", *hyper ? 1 : 0);
  return s;
}

double compression_ratio(const ModelConfig& config) {
  if (config.source_dim() == 0) throw ConfigError("source dimension must be positive");
  return double(config.bandwidth) / double(config.source_dim());
}

ModelConfig default_reconstruction_config(Shape input_shape, std::size_t bandwidth,
                                          std::size_t channels) {
  ModelConfig cfg;
  cfg.task = Task::kReconstruction;
  cfg.input_shape = input_shape;
  cfg.bandwidth = bandwidth;
  const std::size_t C = input_shape.at(0), H = input_shape.at(1), W = input_shape.at(2);
  const std::size_t h = H / 4, w = W / 4;
  const std::size_t latent_ch = 2 * bandwidth / (h * w);
  if (H % 4 != 0 || W % 4 != 0 || latent_ch == 0 || latent_ch * h * w != 2 * bandwidth) {
    throw ConfigError(fmt::format("default autoencoder cannot map {} onto d={}",
                                  shape_str(input_shape), bandwidth));
  }
  auto L = [](const std::string& s) { return LayerSpec::parse(s); };
  cfg.encoder = {
      L(fmt::format("conv out={} k=3 s=1 p=1 act=relu", channels)),
      L(fmt::format("conv out={} k=4 s=2 p=1 act=relu", channels)),
      L(fmt::format("conv out={} k=4 s=2 p=1 act=none", latent_ch)),
  };
  cfg.decoder = {
      L(fmt::format("reshape {}x{}x{}", latent_ch, h, w)),
      L(fmt::format("deconv out={} k=3 s=2 p=1 act=relu", channels)),
      L(fmt::format("deconv out={} k=3 s=2 p=1 act=relu", channels)),
      L(fmt::format("conv out={} k=3 s=1 p=1 act=tanh", C)),
  };
  return cfg;
}

ModelConfig default_classification_config(Shape input_shape, std::size_t bandwidth,
                                          std::size_t num_classes, std::size_t channels) {
  ModelConfig cfg;
  cfg.task = Task::kClassification;
  cfg.input_shape = input_shape;
  cfg.bandwidth = bandwidth;
  cfg.num_classes = num_classes;
  auto L = [](const std::string& s) { return LayerSpec::parse(s); };
  cfg.encoder = {
      L(fmt::format("conv out={} k=3 s=1 p=1 act=relu", channels)),
      L(fmt::format("conv out={} k=4 s=2 p=1 act=relu", channels)),
      L(fmt::format("resblock out={} k=3 s=1 act=relu", channels)),
      L(fmt::format("dense out={} act=none", 2 * bandwidth)),
  };
  cfg.decoder = {
      L(fmt::format("dense out={} act=relu", 4 * channels)),
      L(fmt::format("dense out={} act=softmax", num_classes)),
  };
  return cfg;
}

HyperAJSCCModel::HyperAJSCCModel(ModelConfig config, std::vector<Stage> encoder,
                                 std::vector<Stage> decoder)
    : config_(std::move(config)), encoder_(std::move(encoder)), decoder_(std::move(decoder)) {}

ChannelSymbols HyperAJSCCModel::encode(Tape& tape, Var x, std::span<const double> omega_db) {
  const std::size_t batch = x.shape()[0];
  Shape shaped{batch};
  shaped.insert(shaped.end(), config_.input_shape.begin(), config_.input_shape.end());
  if (x.size() != shape_size(shaped)) {
    throw DimensionError(fmt::format("encoder input {} does not match per-sample shape {}",
                                     shape_str(x.shape()), shape_str(config_.input_shape)));
  }
  if (x.shape() != shaped) x = ops::reshape(x, shaped);
  for (Stage& stage : encoder_) x = stage_forward(stage, tape, x, omega_db);
  if (x.value().rank() != 2) x = ops::reshape(x, {batch, x.size() / batch});
  return power_normalize(x);
}

Var HyperAJSCCModel::decode(Tape& tape, Var z_hat, std::span<const double> omega_db) {
  if (z_hat.value().rank() != 2 || z_hat.shape()[1] != 2 * config_.bandwidth) {
    throw DimensionError(fmt::format("decoder expects [batch x {}], got {}",
                                     2 * config_.bandwidth, shape_str(z_hat.shape())));
  }
  Var y = z_hat;
  for (Stage& stage : decoder_) y = stage_forward(stage, tape, y, omega_db);
  return y;
}

PipelineOutput HyperAJSCCModel::forward_pipeline(Tape& tape, Var x,
                                                 std::span<const double> omega_db, Rng& rng,
                                                 const ChannelModel& channel) {
  ChannelSymbols z = encode(tape, x, omega_db);
  std::vector<ChannelDraw> draws;
  draws.reserve(omega_db.size());
  for (double w : omega_db) draws.push_back(ChannelDraw::at(w));
  Var z_hat = channel.transmit(z, draws, rng);
  Var out = decode(tape, z_hat, omega_db);
  return {out, z, z_hat};
}

NamedParams HyperAJSCCModel::parameters() {
  NamedParams out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    stage_collect(encoder_[i], fmt::format("enc.{}", i), out);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    stage_collect(decoder_[i], fmt::format("dec.{}", i), out);
  }
  return out;
}

ParamReport HyperAJSCCModel::count_params() const {
  ParamReport report;
  auto add = [&](const std::vector<Stage>& stages, const std::vector<LayerSpec>& specs,
                 const char* side) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (std::holds_alternative<ReshapeStage>(stages[i])) continue;
      const ParamCount pc = stage_param_counts(stages[i]);
      report.layers.push_back({fmt::format("{}.{}", side, i), specs[i].describe(), pc.base,
                               pc.introduced});
      report.total_base += pc.base;
      report.total_introduced += pc.introduced;
    }
  };
  add(encoder_, config_.encoder, "enc");
  add(decoder_, config_.decoder, "dec");
  return report;
}

namespace {

Stage make_stage(const ModelConfig& cfg, const LayerSpec& spec, const Shape& in, Rng& rng) {
  const bool hyper = cfg.layer_hyper(spec);
  const OmegaMap map = cfg.omega_map();
  auto scale_for = [&](std::size_t width) -> std::optional<HyperScale> {
    if (!hyper) return std::nullopt;
    return HyperScale::identity(width, map);
  };
  auto require_nchw = [&]() {
    if (in.size() != 4) {
      throw ConfigError(fmt::format("{} needs C x H x W input, got {}", spec.describe(),
                                    shape_str(Shape(in.begin() + 1, in.end()))));
    }
  };
  switch (spec.kind) {
    case LayerSpec::Kind::kDense: {
      const std::size_t width = shape_size(in) / in[0];
      return HyperLayer(DenseLayer::init(width, spec.out, spec.act, rng), scale_for(spec.out));
    }
    case LayerSpec::Kind::kConv:
      require_nchw();
      return HyperLayer(Conv2dLayer::init(in[1], spec.out, spec.kernel, spec.stride,
                                          spec.padding, 1, spec.act, rng),
                        scale_for(spec.out));
    case LayerSpec::Kind::kDeconv:
      require_nchw();
      return HyperLayer(Conv2dLayer::init(in[1], spec.out, spec.kernel, 1, spec.padding,
                                          spec.stride, spec.act, rng),
                        scale_for(spec.out));
    case LayerSpec::Kind::kResBlock: {
      require_nchw();
      const std::size_t pad = spec.kernel / 2;
      HyperLayer c1(Conv2dLayer::init(in[1], spec.out, spec.kernel, spec.stride, pad, 1,
                                      spec.act, rng),
                    scale_for(spec.out));
      HyperLayer c2(Conv2dLayer::init(spec.out, spec.out, spec.kernel, 1, pad, 1,
                                      ActivationKind::kNone, rng),
                    scale_for(spec.out));
      std::optional<HyperLayer> proj;
      if (in[1] != spec.out || spec.stride != 1) {
        proj.emplace(Conv2dLayer::init(in[1], spec.out, 1, spec.stride, 0, 1,
                                       ActivationKind::kNone, rng),
                     scale_for(spec.out));
      }
      return ResidualBlock(std::move(c1), std::move(c2), std::move(proj), spec.act);
    }
    case LayerSpec::Kind::kReshape:
      return ReshapeStage{spec.reshape};
  }
  throw ConfigError("unreachable layer kind");
}

std::vector<Stage> build_stack(const ModelConfig& cfg, const std::vector<LayerSpec>& specs,
                               Shape& shape, const char* side, Rng& rng) {
  std::vector<Stage> stages;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      stages.push_back(make_stage(cfg, specs[i], shape, rng));
      shape = stage_output_shape(stages.back(), shape);
    } catch (const Error& e) {
      throw ConfigError(
          fmt::format("{} layer {} ({}): {}", side, i, specs[i].describe(), e.what()));
    }
  }
  return stages;
}

}  // namespace

HyperAJSCCModel build_model(const ModelConfig& cfg, Rng& rng) {
  if (cfg.input_shape.empty() || shape_size(cfg.input_shape) == 0) {
    throw ConfigError("input_shape must be non-empty");
  }
  if (cfg.bandwidth == 0) throw ConfigError("bandwidth d must be positive");
  if (cfg.encoder.empty() || cfg.decoder.empty()) {
    throw ConfigError("encoder and decoder need at least one layer each");
  }
  (void)cfg.omega_map();

  Shape shape{1};
  shape.insert(shape.end(), cfg.input_shape.begin(), cfg.input_shape.end());
  auto encoder = build_stack(cfg, cfg.encoder, shape, "encoder", rng);
  const std::size_t enc_width = shape_size(shape);
  if (enc_width != 2 * cfg.bandwidth) {
    throw ConfigError(fmt::format("encoder final width {} must equal 2d = {} (encoder layer {})",
                                  enc_width, 2 * cfg.bandwidth, cfg.encoder.size() - 1));
  }

  shape = {1, 2 * cfg.bandwidth};
  auto decoder = build_stack(cfg, cfg.decoder, shape, "decoder", rng);
  const Shape per_sample(shape.begin() + 1, shape.end());
  // The output activation belongs to the last layer with weights; a trailing
  // reshape only restores the image shape.
  std::size_t last_idx = cfg.decoder.size() - 1;
  while (last_idx > 0 && cfg.decoder[last_idx].kind == LayerSpec::Kind::kReshape) --last_idx;
  const LayerSpec& last = cfg.decoder[last_idx];
  if (cfg.task == Task::kReconstruction) {
    if (per_sample != cfg.input_shape) {
      throw ConfigError(fmt::format("decoder layer {} outputs {}, reconstruction needs {}",
                                    last_idx, shape_str(per_sample), shape_str(cfg.input_shape)));
    }
    if (last.act != ActivationKind::kTanh) {
      throw ConfigError(fmt::format("decoder layer {} must use act=tanh for reconstruction", last_idx));
    }
  } else {
    if (cfg.num_classes < 2) throw ConfigError("classification needs num_classes >= 2");
    if (per_sample.size() != 1 || per_sample[0] != cfg.num_classes) {
      throw ConfigError(fmt::format("decoder layer {} outputs {}, classification needs K = {}",
                                    last_idx, shape_str(per_sample), cfg.num_classes));
    }
    if (last.act != ActivationKind::kSoftmax) {
      throw ConfigError(fmt::format("decoder layer {} must use act=softmax for classification", last_idx));
    }
  }
  return HyperAJSCCModel(cfg, std::move(encoder), std::move(decoder));
}

HyperAJSCCModel build_model(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, stream::kInit));
  return build_model(config, rng);
}

}  // namespace hajscc
