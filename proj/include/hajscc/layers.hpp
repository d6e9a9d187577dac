#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hajscc/autodiff.hpp"
#include "hajscc/ops.hpp"
#include "hajscc/random.hpp"
#include "hajscc/tensor.hpp"

namespace hajscc {

using ActivationKind = ops::ActivationKind;

/// Affine map from SNR in dB to the conditioning value fed to the hyper
/// scales. from_range(lo, hi) sends [lo, hi] onto [-1, 1].
struct OmegaMap {
  double gain = 1.0;
  double offset = 0.0;

  double operator()(double omega_db) const { return gain * omega_db + offset; }
  static OmegaMap from_range(double lo_db, double hi_db);
  static OmegaMap identity() { return {}; }
};

struct DenseLayer {
  Tensor W0;  // [out x in]
  Tensor b0;  // [out]
  ActivationKind act = ActivationKind::kNone;

  std::size_t in_features() const { return W0.dim(1); }
  std::size_t out_features() const { return W0.dim(0); }

  /// He-uniform weights, zero bias.
  static DenseLayer init(std::size_t in, std::size_t out, ActivationKind act, Rng& rng);
};

struct Conv2dLayer {
  Tensor C0;  // [out_ch x in_ch x K x K]
  Tensor b0;  // [out_ch]
  std::size_t stride = 1;
  std::size_t padding = 0;
  // > 1 turns the layer into a transposed convolution: zero-insertion
  // upsampling by this factor followed by a stride-1 convolution.
  std::size_t upsample = 1;
  ActivationKind act = ActivationKind::kNone;

  std::size_t in_channels() const { return C0.dim(1); }
  std::size_t out_channels() const { return C0.dim(0); }
  std::size_t kernel_size() const { return C0.dim(2); }

  static Conv2dLayer init(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t stride, std::size_t padding, std::size_t upsample,
                          ActivationKind act, Rng& rng);
};

/// Per-output-channel gain s = omega~ * nu + c, omega~ = omega_map(omega_db).
struct HyperScale {
  Tensor nu;
  Tensor c;
  OmegaMap omega_map;

  /// nu = 0, c = 1: the identity scaling.
  static HyperScale identity(std::size_t width, OmegaMap map);
};

/// s for a single SNR, recorded on the tape so nu and c receive gradients.
Var hyper_scale_vector(Tape& tape, HyperScale& scale, double omega_db);

struct ParamCount {
  std::size_t base = 0;
  std::size_t introduced = 0;

  ParamCount& operator+=(const ParamCount& o) {
    base += o.base;
    introduced += o.introduced;
    return *this;
  }
};

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

/// A dense or conv base module with optional channel-conditioned scaling.
/// Without a scale it is exactly the base layer.
class HyperLayer {
 public:
  using Base = std::variant<DenseLayer, Conv2dLayer>;

  HyperLayer(Base base, std::optional<HyperScale> scale);

  bool is_dense() const { return std::holds_alternative<DenseLayer>(base_); }
  bool is_conv() const { return std::holds_alternative<Conv2dLayer>(base_); }
  const DenseLayer& dense() const { return std::get<DenseLayer>(base_); }
  const Conv2dLayer& conv() const { return std::get<Conv2dLayer>(base_); }
  DenseLayer& dense() { return std::get<DenseLayer>(base_); }
  Conv2dLayer& conv() { return std::get<Conv2dLayer>(base_); }
  const std::optional<HyperScale>& scale() const { return scale_; }
  std::optional<HyperScale>& scale() { return scale_; }

  std::size_t out_channels() const;
  ActivationKind activation() const;

  /// Pre-activation output sigma's argument, i.e. s ⊙ (base(x)).
  /// `omega_db` holds one SNR per sample, or a single value for the batch.
  Var pre_activation(Tape& tape, Var x, std::span<const double> omega_db);
  Var forward(Tape& tape, Var x, std::span<const double> omega_db);
  Var forward(Tape& tape, Var x, double omega_db) {
    return forward(tape, x, std::span<const double>(&omega_db, 1));
  }

  /// Output shape for a batch input shape, without running the layer.
  Shape output_shape(const Shape& input) const;

  ParamCount param_counts() const;
  void collect(const std::string& prefix, NamedParams& out);

 private:
  Base base_;
  std::optional<HyperScale> scale_;
};

/// Base conv weights with the channel scaling folded in: C(w) = s ⊙row C0
/// and b(w) = s ⊙ b0. Materialized for inspection and equivalence checks;
/// the forward pass scales output channels instead.
std::pair<Var, Var> materialize_conv(Tape& tape, HyperLayer& layer, double omega_db);

/// act(conv2(act(conv1(x))) + skip(x)); skip is identity or a 1x1 projection
/// when channel count or stride changes. conv2 carries no activation of its own.
class ResidualBlock {
 public:
  ResidualBlock(HyperLayer conv1, HyperLayer conv2, std::optional<HyperLayer> projection,
                ActivationKind act);

  Var forward(Tape& tape, Var x, std::span<const double> omega_db);
  Shape output_shape(const Shape& input) const;
  ParamCount param_counts() const;
  void collect(const std::string& prefix, NamedParams& out);

  HyperLayer& conv1() { return conv1_; }
  HyperLayer& conv2() { return conv2_; }
  std::optional<HyperLayer>& projection() { return projection_; }
  std::size_t out_channels() const { return conv2_.out_channels(); }

 private:
  HyperLayer conv1_;
  HyperLayer conv2_;
  std::optional<HyperLayer> projection_;
  ActivationKind act_;
};

/// Reshape each sample to `target` (batch axis kept).
struct ReshapeStage {
  Shape target;
};

using Stage = std::variant<HyperLayer, ResidualBlock, ReshapeStage>;

Var stage_forward(Stage& stage, Tape& tape, Var x, std::span<const double> omega_db);
Shape stage_output_shape(const Stage& stage, const Shape& input);
ParamCount stage_param_counts(const Stage& stage);
void stage_collect(Stage& stage, const std::string& prefix, NamedParams& out);

}  // namespace hajscc
