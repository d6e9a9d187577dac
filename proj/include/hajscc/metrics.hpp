#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hajscc/data.hpp"
#include "hajscc/models.hpp"

namespace hajscc {

/// Returned for a perfect reconstruction instead of +inf.
inline constexpr double kPsnrCapDb = 100.0;

/// 10 log10(max_value^2 / MSE), kPsnrCapDb when MSE == 0.
double psnr(std::span<const double> x, std::span<const double> x_hat, double max_value);
double psnr(const Tensor& x, const Tensor& x_hat, double max_value);

/// PSNR of images stored in [-1, 1]: both are mapped to [0, 1] via
/// (v + 1) / 2 and MAX = 1.
double image_psnr(std::span<const double> x, std::span<const double> x_hat);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double top1_accuracy(const Tensor& probs, std::span<const int> labels);

/// Metric reported for a task: mean per-image PSNR or top-1 accuracy.
std::string metric_name(Task task);

struct EvalOptions {
  std::size_t batch_size = 256;
  bool noiseless = false;  // run the decoder on z instead of z + noise
};

/// One pass over `data` with every sample sent at `omega_db`.
double evaluate(HyperAJSCCModel& model, const Dataset& data, double omega_db, Rng& noise_rng,
                const EvalOptions& options = {});

struct SweepRow {
  double snr_db = 0.0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;  // sample std over seeds; 0 for a single seed
  std::size_t n = 0;  // evaluated samples, summed over seeds
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::string model_digest;
  std::string config_digest;

  /// Row for (metric, snr); throws ContractError if absent.
  const SweepRow& at(const std::string& metric, double snr_db) const;
  std::vector<const SweepRow*> series(const std::string& metric) const;
  /// Column order: snr_db,metric,mean,std,n.
  void write_csv(std::ostream& out) const;
};

struct SweepOptions {
  std::size_t batch_size = 256;
  /// Adds "<metric>_noiseless" rows evaluated without channel noise.
  bool noiseless_probe = false;
};

/// Evaluates every (grid point, seed) pair; grid points run in parallel on
/// private model copies and are merged in grid order. Grid must be strictly
/// increasing. Noise for (seed, grid index) comes from its own stream, so the
/// report does not depend on thread count.
SweepReport snr_sweep(const HyperAJSCCModel& model, const Dataset& data,
                      std::span<const double> snr_grid, std::span<const std::uint64_t> seeds,
                      const SweepOptions& options = {});

struct GapRow {
  double snr_db = 0.0;
  double fixed = 0.0;     // fixed model trained at snr_db, tested at snr_db
  double adaptive = 0.0;  // adaptive model tested at snr_db
  double gap = 0.0;       // fixed - adaptive
};

/// For each fixed model (keyed by its training SNR), compares its matched
/// test point against the adaptive model at the same SNR.
std::vector<GapRow> compare_adaptive_vs_fixed(const SweepReport& adaptive,
                                              const std::map<double, SweepReport>& fixed,
                                              const std::string& metric);

/// Parses "lo:hi:step" or "a,b,c" into SNR values.
std::vector<double> parse_snr_grid(const std::string& text);

}  // namespace hajscc
