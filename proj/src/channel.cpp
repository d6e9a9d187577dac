#include "hajscc/channel.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "hajscc/errors.hpp"
#include "hajscc/ops.hpp"

namespace hajscc {

double snr_to_sigma2(double omega_db) { return std::pow(10.0, -omega_db / 10.0); }

ChannelDraw ChannelDraw::at(double omega_db) {
  return {omega_db, omega_db >= kNoiselessSnrDb ? 0.0 : snr_to_sigma2(omega_db)};
}

SnrPrior SnrPrior::uniform(double lo_db, double hi_db) {
  SnrPrior p;
  p.kind = Kind::kUniform;
  p.lo_db = lo_db;
  p.hi_db = hi_db;
  p.validate();
  return p;
}

SnrPrior SnrPrior::fixed(double value_db) {
  SnrPrior p;
  p.kind = Kind::kFixed;
  p.value_db = value_db;
  return p;
}

SnrPrior SnrPrior::discrete(std::vector<double> values, std::vector<double> weights) {
  SnrPrior p;
  p.kind = Kind::kDiscrete;
  p.values = std::move(values);
  p.weights = std::move(weights);
  p.validate();
  return p;
}

void SnrPrior::validate() const {
  switch (kind) {
    case Kind::kUniform:
      if (!(lo_db <= hi_db)) {
        throw ConfigError(fmt::format("uniform SNR prior needs lo <= hi, got [{}, {}]", lo_db, hi_db));
      }
      break;
    case Kind::kFixed:
      break;
    case Kind::kDiscrete: {
      if (values.empty() || values.size() != weights.size()) {
        throw ConfigError("discrete SNR prior needs matching non-empty values and weights");
      }
      for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("discrete SNR prior weights must be non-negative");
      }
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError(fmt::format("discrete SNR prior weights sum to {}, not 1", total));
      }
      break;
    }
  }
}

std::string SnrPrior::describe() const {
  switch (kind) {
    case Kind::kUniform:
      return fmt::format("uniform {} {}", lo_db, hi_db);
    case Kind::kFixed:
      return fmt::format("fixed {}", value_db);
    case Kind::kDiscrete: {
      std::string out = "discrete ";
      for (std::size_t i = 0; i < values.size(); ++i) {
        out += fmt::format("{}{}:{}", i ? "," : "", values[i], weights[i]);
      }
      return out;
    }
  }
  return {};
}

SnrPrior SnrPrior::parse(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  auto fail = [&]() -> SnrPrior {
    throw ConfigError(fmt::format(
        "bad SNR prior '{}' (expected 'uniform LO HI', 'fixed DB' or 'discrete DB:W,...')", text));
  };
  if (kind == "uniform") {
    double lo, hi;
    if (!(in >> lo >> hi)) return fail();
    return uniform(lo, hi);
  }
  if (kind == "fixed") {
    double v;
    if (!(in >> v)) return fail();
    return fixed(v);
  }
  if (kind == "discrete") {
    std::string list;
    if (!(in >> list)) return fail();
    std::vector<double> values, weights;
    std::istringstream items(list);
    std::string item;
    while (std::getline(items, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) return fail();
      try {
        values.push_back(std::stod(item.substr(0, colon)));
        weights.push_back(std::stod(item.substr(colon + 1)));
      } catch (const std::exception&) {
        return fail();
      }
    }
    return discrete(std::move(values), std::move(weights));
  }
  return fail();
}

double sample_snr(const SnrPrior& prior, Rng& rng) {
  switch (prior.kind) {
    case SnrPrior::Kind::kFixed:
      return prior.value_db;
    case SnrPrior::Kind::kUniform: {
      if (prior.lo_db == prior.hi_db) return prior.lo_db;
      std::uniform_real_distribution<double> dist(prior.lo_db, prior.hi_db);
      return dist(rng);
    }
    case SnrPrior::Kind::kDiscrete: {
      std::discrete_distribution<std::size_t> dist(prior.weights.begin(), prior.weights.end());
      return prior.values[dist(rng)];
    }
  }
  return prior.value_db;
}

double average_power(std::span<const double> row) {
  double acc = 0.0;
  for (double v : row) acc += v * v;
  return acc / (double(row.size()) / 2.0);
}

ChannelSymbols power_normalize(Var z_raw) {
  const Tensor& Z = z_raw.value();
  if (Z.rank() != 2 || Z.dim(1) % 2 != 0) {
    throw DimensionError(fmt::format("power_normalize needs [batch x 2d] input, got {}",
                                     shape_str(Z.shape())));
  }
  const std::size_t rows = Z.dim(0), cols = Z.dim(1), d = cols / 2;
  const double root_d = std::sqrt(double(d));
  std::vector<double> norms(rows);
  Tensor out(Z.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < cols; ++j) ss += Z[r * cols + j] * Z[r * cols + j];
    if (ss == 0.0) {
      throw DegenerateInputError(
          fmt::format("power_normalize: row {} is all zeros and cannot carry unit power", r));
    }
    norms[r] = std::sqrt(ss);
    const double k = root_d / norms[r];
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = Z[r * cols + j] * k;
  }
  // y = k z / |z|  =>  dz = (k / |z|) (g - z (z . g) / |z|^2)
  Var y = z_raw.tape->record(
      std::move(out), {z_raw.id},
      [rows, cols, root_d, norms = std::move(norms)](GradContext& g) {
        const Tensor& Z = *g.in[0];
        for (std::size_t r = 0; r < rows; ++r) {
          const double n = norms[r];
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += Z[r * cols + j] * g.out_grad[r * cols + j];
          const double k = root_d / n;
          const double proj = dot / (n * n);
          for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t i = r * cols + j;
            g.in_grad[0][i] += k * (g.out_grad[i] - Z[i] * proj);
          }
        }
      });
  return {y, d};
}

Var AwgnChannel::transmit(const ChannelSymbols& z, std::span<const ChannelDraw> draws,
                          Rng& rng) const {
  const Tensor& Z = z.values.value();
  const std::size_t rows = Z.dim(0), cols = Z.dim(1);
  if (draws.size() != 1 && draws.size() != rows) {
    throw DimensionError(fmt::format("{} channel draws for a batch of {}", draws.size(), rows));
  }
  Tensor noise(Z.shape(), 0.0);
  bool any = false;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const ChannelDraw& draw = draws[draws.size() == 1 ? 0 : r];
    if (draw.noiseless()) continue;
    any = true;
    const double sd = std::sqrt(draw.sigma2 / 2.0);
    for (std::size_t j = 0; j < cols; ++j) noise[r * cols + j] = sd * gauss(rng);
  }
  if (!any) return z.values;
  return ops::add(z.values, z.values.tape->constant(std::move(noise)));
}

Var awgn_transmit(const ChannelSymbols& z, std::span<const ChannelDraw> draws, Rng& rng) {
  return AwgnChannel{}.transmit(z, draws, rng);
}

}  // namespace hajscc
