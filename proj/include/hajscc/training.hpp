#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hajscc/channel.hpp"
#include "hajscc/data.hpp"
#include "hajscc/models.hpp"

namespace hajscc {

/// mean((x - x_hat)^2) over all elements.
Var mse_loss(Var x, Var x_hat);

/// Probabilities below this are clamped before the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// mean_i -log(max(probs[i, label_i], floor)).
Var cross_entropy_loss(Var probs, std::span<const int> labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam step over `params` using their grad buffers:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are allocated on first use.
void adam_update(OptimizerState& state, std::span<Tensor* const> params, const AdamConfig& cfg);

enum class LossKind { kMse, kCrossEntropy };

LossKind default_loss(Task task);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  AdamConfig adam;
  SnrPrior prior = SnrPrior::uniform(0.0, 20.0);
  LossKind loss = LossKind::kMse;
  std::uint64_t seed = 1;
  /// Validate every this many epochs (and always after the last one); 0 disables.
  std::size_t val_every = 1;
  std::vector<double> val_grid{1, 4, 7, 10, 13, 16, 19};

  void validate() const;
};

struct Batch {
  Tensor x;
  std::vector<int> labels;
};

/// Forward every sample at its own SNR (one channel draw each), average the
/// per-sample losses, backpropagate and apply one Adam step to every
/// trainable parameter. Returns the batch loss before the update.
/// Throws NumericError on a non-finite loss.
double train_step(HyperAJSCCModel& model, const Batch& batch, std::span<const double> omegas,
                  OptimizerState& optimizer, const AdamConfig& adam, LossKind loss,
                  Rng& noise_rng);

/// Loss of one batch without touching parameters or grads.
double batch_loss(HyperAJSCCModel& model, const Batch& batch, std::span<const double> omegas,
                  LossKind loss, Rng& noise_rng);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;                 // mean training loss over the epoch
  std::vector<double> val_metric;    // one per val grid point; empty if skipped
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<double> val_grid;
  std::string metric;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::size_t steps = 0;

  /// epoch,loss,val_<snr>dB...  (blank val cells for skipped epochs)
  void write_csv(std::ostream& out) const;
};

/// Runs `config.epochs` epochs of shuffled mini-batches with per-sample
/// SNRs drawn from the prior. Deterministic given config.seed.
/// `val` may be null.
TrainLog train(HyperAJSCCModel& model, const Dataset& data, const Dataset* val,
               const TrainConfig& config);

}  // namespace hajscc
