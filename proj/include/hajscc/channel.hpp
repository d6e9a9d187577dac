#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hajscc/autodiff.hpp"
#include "hajscc/random.hpp"

namespace hajscc {

/// Test SNRs at or above this are treated as a noiseless channel.
inline constexpr double kNoiselessSnrDb = 40.0;

/// sigma^2 = 10^(-omega/10): noise power per complex symbol at unit signal power.
double snr_to_sigma2(double omega_db);

struct ChannelDraw {
  double omega_db = 0.0;
  double sigma2 = 1.0;

  /// Applies the noiseless cap: sigma2 = 0 for omega_db >= kNoiselessSnrDb.
  static ChannelDraw at(double omega_db);
  bool noiseless() const { return sigma2 == 0.0; }
};

/// Distribution the training SNRs are drawn from.
struct SnrPrior {
  enum class Kind { kUniform, kFixed, kDiscrete };

  Kind kind = Kind::kUniform;
  double lo_db = 0.0;
  double hi_db = 20.0;
  double value_db = 0.0;
  std::vector<double> values;
  std::vector<double> weights;

  static SnrPrior uniform(double lo_db, double hi_db);
  static SnrPrior fixed(double value_db);
  static SnrPrior discrete(std::vector<double> values, std::vector<double> weights);

  /// Throws ConfigError when lo > hi or discrete weights do not sum to 1.
  void validate() const;
  /// Canonical text form, e.g. "uniform 0 20", "fixed 7", "discrete 1:0.5,19:0.5".
  std::string describe() const;
  static SnrPrior parse(const std::string& text);
};

double sample_snr(const SnrPrior& prior, Rng& rng);

/// Complex symbols of a batch, real/imag interleaved: shape [batch x 2d].
struct ChannelSymbols {
  Var values;
  std::size_t d = 0;
};

/// Scales each row by sqrt(d) / ||row|| so its average complex-symbol power
/// (1/d) sum |z_i|^2 is exactly 1. Differentiable through the norm.
/// Throws DegenerateInputError on an all-zero row.
ChannelSymbols power_normalize(Var z_raw);

/// (1/d) * sum of squares over one interleaved row of 2d reals.
double average_power(std::span<const double> row);

/// Channel seam: maps transmitted symbols to received symbols.
class ChannelModel {
 public:
  virtual ~ChannelModel() = default;
  /// `draws` holds one entry per sample, or a single entry for the batch.
  virtual Var transmit(const ChannelSymbols& z, std::span<const ChannelDraw> draws,
                       Rng& rng) const = 0;
};

/// z_hat = z + eps, eps ~ CN(0, sigma^2 I): each real component gets
/// N(0, sigma^2 / 2). The noise is a tape constant, so gradients pass
/// through z unchanged.
class AwgnChannel final : public ChannelModel {
 public:
  Var transmit(const ChannelSymbols& z, std::span<const ChannelDraw> draws,
               Rng& rng) const override;
};

Var awgn_transmit(const ChannelSymbols& z, std::span<const ChannelDraw> draws, Rng& rng);

}  // namespace hajscc
