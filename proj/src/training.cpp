#include "hajscc/training.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "hajscc/errors.hpp"
#include "hajscc/metrics.hpp"
#include "hajscc/ops.hpp"

namespace hajscc {

Var mse_loss(Var x, Var x_hat) {
  if (x.shape() != x_hat.shape()) {
    throw DimensionError(fmt::format("mse_loss: shapes {} and {} differ", shape_str(x.shape()),
                                     shape_str(x_hat.shape())));
  }
  Var d = ops::sub(x_hat, x);
  return ops::mean(ops::mul(d, d));
}

Var cross_entropy_loss(Var probs, std::span<const int> labels) {
  const Tensor& P = probs.value();
  if (P.rank() != 2) throw DimensionError("cross_entropy_loss needs [batch x K] probabilities");
  const std::size_t rows = P.dim(0), K = P.dim(1);
  if (labels.size() != rows) {
    throw DimensionError(fmt::format("{} labels for {} rows", labels.size(), rows));
  }
  std::vector<std::size_t> lab(rows);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || std::size_t(labels[r]) >= K) {
      throw ContractError(fmt::format("label {} outside [0, {})", labels[r], K));
    }
    lab[r] = std::size_t(labels[r]);
    total -= std::log(std::max(P[r * K + lab[r]], kProbabilityFloor));
  }
  const double inv = 1.0 / double(rows);
  return probs.tape->record(Tensor::scalar(total * inv), {probs.id},
                            [lab = std::move(lab), K, inv](GradContext& g) {
                              const Tensor& P = *g.in[0];
                              for (std::size_t r = 0; r < lab.size(); ++r) {
                                const double p = P[r * K + lab[r]];
                                // Clamped region is flat.
                                if (p > kProbabilityFloor) {
                                  g.in_grad[0][r * K + lab[r]] -= g.out_grad[0] * inv / p;
                                }
                              }
                            });
}

void adam_update(OptimizerState& state, std::span<Tensor* const> params, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("optimizer state does not match the parameter list");
  }
  ++state.step;
  const double t = double(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size()) throw ContractError("optimizer moment shape mismatch");
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      w[k] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
}

LossKind default_loss(Task task) {
  return task == Task::kReconstruction ? LossKind::kMse : LossKind::kCrossEntropy;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
  prior.validate();
}

namespace {

Var batch_objective(HyperAJSCCModel& model, Tape& tape, const Batch& batch,
                    std::span<const double> omegas, LossKind loss, Rng& noise_rng) {
  const std::size_t n = batch.x.dim(0);
  if (omegas.size() != n) {
    throw ContractError(fmt::format("{} SNR values for a batch of {}", omegas.size(), n));
  }
  Var x = tape.constant(batch.x);
  PipelineOutput out = model.forward_pipeline(tape, x, omegas, noise_rng);
  if (loss == LossKind::kMse) {
    return mse_loss(x, ops::reshape(out.output, x.shape()));
  }
  return cross_entropy_loss(out.output, batch.labels);
}

}  // namespace

double batch_loss(HyperAJSCCModel& model, const Batch& batch, std::span<const double> omegas,
                  LossKind loss, Rng& noise_rng) {
  Tape tape;
  return batch_objective(model, tape, batch, omegas, loss, noise_rng).value().item();
}

double train_step(HyperAJSCCModel& model, const Batch& batch, std::span<const double> omegas,
                  OptimizerState& optimizer, const AdamConfig& adam, LossKind loss,
                  Rng& noise_rng) {
  NamedParams params = model.parameters();
  std::vector<Tensor*> ptrs;
  ptrs.reserve(params.size());
  for (auto& [name, p] : params) {
    p->zero_grad();
    ptrs.push_back(p);
  }
  Tape tape;
  Var objective = batch_objective(model, tape, batch, omegas, loss, noise_rng);
  const double value = objective.value().item();
  if (!std::isfinite(value)) throw NumericError("non-finite training loss");
  tape.backward(objective);
  adam_update(optimizer, ptrs, adam);
  return value;
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "epoch,loss";
  for (double s : val_grid) out << fmt::format(",val_{}_{:g}dB", metric, s);
  out << "\n";
  for (const auto& e : epochs) {
    out << fmt::format("{},{:.10f}", e.epoch, e.loss);
    for (std::size_t i = 0; i < val_grid.size(); ++i) {
      if (i < e.val_metric.size()) {
        out << fmt::format(",{:.6f}", e.val_metric[i]);
      } else {
        out << ",";
      }
    }
    out << "\n";
  }
}

TrainLog train(HyperAJSCCModel& model, const Dataset& data, const Dataset* val,
               const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw ContractError("train: empty dataset");
  if (model.config().task == Task::kClassification && !data.labeled()) {
    throw ContractError("train: classification needs labels");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t batch_size = std::min(config.batch_size, data.size());

  TrainLog log;
  log.seed = config.seed;
  log.val_grid = config.val_grid;
  log.metric = metric_name(model.config().task);

  Rng snr_rng(derive_seed(config.seed, stream::kSnr));
  Rng noise_rng(derive_seed(config.seed, stream::kNoise));
  OptimizerState opt;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    const auto plan = batches(data, batch_size, config.seed, epoch);
    for (std::size_t step = 0; step < plan.size(); ++step) {
      Batch batch{data.gather(plan[step]), data.gather_labels(plan[step])};
      std::vector<double> omegas(plan[step].size());
      for (double& w : omegas) w = sample_snr(config.prior, snr_rng);
      double loss = 0.0;
      try {
        loss = train_step(model, batch, omegas, opt, config.adam, config.loss, noise_rng);
      } catch (const NumericError&) {
        throw NumericError(
            fmt::format("non-finite loss at epoch {} step {}; aborting", epoch, step + 1));
      }
      loss_sum += loss;
      ++log.steps;
    }
    rec.loss = loss_sum / double(plan.size());

    const bool validate_now =
        val && config.val_every && (epoch % config.val_every == 0 || epoch == config.epochs);
    if (validate_now) {
      for (std::size_t g = 0; g < config.val_grid.size(); ++g) {
        Rng vrng(derive_seed(derive_seed(config.seed, stream::kValidation), g));
        rec.val_metric.push_back(evaluate(model, *val, config.val_grid[g], vrng));
      }
    }
    log.epochs.push_back(std::move(rec));
  }
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

}  // namespace hajscc
