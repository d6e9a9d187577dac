#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hajscc/channel.hpp"
#include "hajscc/layers.hpp"

namespace hajscc {

enum class Task { kReconstruction, kClassification };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);

/// One encoder/decoder stage, as written in a config file:
///   dense out=32 act=relu
///   conv out=16 k=4 s=2 p=1 act=relu hyper=0
///   deconv out=16 k=3 s=2 p=1 act=relu     (s = upsampling factor)
///   resblock out=8 k=3 s=1 act=relu
///   reshape 4x2x2
struct LayerSpec {
  enum class Kind { kDense, kConv, kDeconv, kResBlock, kReshape };

  Kind kind = Kind::kDense;
  std::size_t out = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  ActivationKind act = ActivationKind::kNone;
  std::optional<bool> hyper;  // unset: follow ModelConfig::hyper
  Shape reshape;

  static LayerSpec parse(const std::string& text);
  std::string describe() const;
};

struct ModelConfig {
  Task task = Task::kReconstruction;
  Shape input_shape{3, 8, 8};  // per sample, C x H x W
  std::size_t bandwidth = 8;   // d complex channel symbols
  std::size_t num_classes = 0;
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  bool hyper = true;
  double omega_lo_db = 0.0;
  double omega_hi_db = 20.0;

  std::size_t source_dim() const { return shape_size(input_shape); }
  OmegaMap omega_map() const { return OmegaMap::from_range(omega_lo_db, omega_hi_db); }
  bool layer_hyper(const LayerSpec& spec) const { return spec.hyper.value_or(hyper); }
};

/// R = d / n.
double compression_ratio(const ModelConfig& config);

/// Desk-scale conv autoencoder: 3 conv encoder layers (stride 1, 2, 2) and a
/// mirrored decoder of 2 transposed convs plus a tanh conv head.
ModelConfig default_reconstruction_config(Shape input_shape = {3, 8, 8},
                                          std::size_t bandwidth = 8,
                                          std::size_t channels = 20);

/// 2 conv + residual block + dense encoder, dense softmax head.
ModelConfig default_classification_config(Shape input_shape = {1, 8, 8},
                                          std::size_t bandwidth = 4,
                                          std::size_t num_classes = 2,
                                          std::size_t channels = 8);

struct LayerParamRow {
  std::string name;
  std::string kind;
  std::size_t base = 0;
  std::size_t introduced = 0;
};

struct ParamReport {
  std::vector<LayerParamRow> layers;
  std::size_t total_base = 0;
  std::size_t total_introduced = 0;

  std::size_t total() const { return total_base + total_introduced; }
  /// Checkpoints store 4-byte floats.
  std::size_t bytes_at_32bit() const { return 4 * total(); }
  std::size_t introduced_bytes_at_32bit() const { return 4 * total_introduced; }
  double introduced_ratio() const {
    return total_base ? double(total_introduced) / double(total_base) : 0.0;
  }
};

struct PipelineOutput {
  Var output;  // reconstruction [B x C x H x W] or class probabilities [B x K]
  ChannelSymbols z;
  Var z_hat;
};

/// Encoder/decoder pair whose weights are generated from the channel SNR by
/// per-layer hyper scales. With every hyper flag off it is a plain
/// fixed-parameter autoencoder.
class HyperAJSCCModel {
 public:
  HyperAJSCCModel(ModelConfig config, std::vector<Stage> encoder, std::vector<Stage> decoder);

  const ModelConfig& config() const { return config_; }
  std::vector<Stage>& encoder() { return encoder_; }
  std::vector<Stage>& decoder() { return decoder_; }

  /// `omega_db` carries one SNR per sample or a single SNR for the batch.
  ChannelSymbols encode(Tape& tape, Var x, std::span<const double> omega_db);
  Var decode(Tape& tape, Var z_hat, std::span<const double> omega_db);
  PipelineOutput forward_pipeline(Tape& tape, Var x, std::span<const double> omega_db, Rng& rng,
                                  const ChannelModel& channel = AwgnChannel{});

  /// Deterministic order: encoder stages then decoder stages, each as
  /// base weights, base bias, nu, c.
  NamedParams parameters();
  ParamReport count_params() const;

 private:
  ModelConfig config_;
  std::vector<Stage> encoder_;
  std::vector<Stage> decoder_;
};

/// He-uniform weights, zero biases, nu = 0, c = 1. Throws ConfigError naming
/// the first layer whose shapes do not line up.
HyperAJSCCModel build_model(const ModelConfig& config, Rng& init_rng);
HyperAJSCCModel build_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace hajscc
