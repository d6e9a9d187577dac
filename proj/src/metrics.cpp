#include "hajscc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "hajscc/errors.hpp"

namespace hajscc {

double psnr(std::span<const double> x, std::span<const double> x_hat, double max_value) {
  if (x.size() != x_hat.size() || x.empty()) {
    throw DimensionError(fmt::format("psnr: sizes {} and {} differ", x.size(), x_hat.size()));
  }
  if (!(max_value > 0.0)) throw ContractError("psnr: max_value must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x_hat[i];
    se += d * d;
  }
  const double mse = se / double(x.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(max_value * max_value / mse));
}

double psnr(const Tensor& x, const Tensor& x_hat, double max_value) {
  if (x.shape() != x_hat.shape()) {
    throw DimensionError(fmt::format("psnr: shapes {} and {} differ", shape_str(x.shape()),
                                     shape_str(x_hat.shape())));
  }
  return psnr(x.data(), x_hat.data(), max_value);
}

double image_psnr(std::span<const double> x, std::span<const double> x_hat) {
  if (x.size() != x_hat.size()) {
    throw DimensionError(fmt::format("psnr: sizes {} and {} differ", x.size(), x_hat.size()));
  }
  std::vector<double> a(x.size()), b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] = (x[i] + 1.0) / 2.0;
    b[i] = (x_hat[i] + 1.0) / 2.0;
  }
  return psnr(a, b, 1.0);
}

double top1_accuracy(const Tensor& probs, std::span<const int> labels) {
  if (probs.rank() != 2) throw DimensionError("top1_accuracy needs [batch x K] probabilities");
  const std::size_t rows = probs.dim(0), K = probs.dim(1);
  if (labels.empty()) throw ContractError("top1_accuracy on an empty batch");
  if (labels.size() != rows) {
    throw DimensionError(fmt::format("{} labels for {} rows", labels.size(), rows));
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || std::size_t(labels[r]) >= K) {
      throw ContractError(fmt::format("label {} outside [0, {})", labels[r], K));
    }
    const double* row = probs.data().data() + r * K;
    const std::size_t arg = std::size_t(std::max_element(row, row + K) - row);
    if (arg == std::size_t(labels[r])) ++correct;
  }
  return double(correct) / double(rows);
}

std::string metric_name(Task task) {
  return task == Task::kReconstruction ? "psnr" : "accuracy";
}

double evaluate(HyperAJSCCModel& model, const Dataset& data, double omega_db, Rng& noise_rng,
                const EvalOptions& options) {
  if (data.size() == 0) throw ContractError("evaluate: empty dataset");
  const Task task = model.config().task;
  if (task == Task::kClassification && !data.labeled()) {
    throw ContractError("evaluate: classification needs a labelled dataset");
  }
  const double send_db = options.noiseless ? kNoiselessSnrDb : omega_db;
  const std::size_t item = shape_size(data.item_shape());
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += options.batch_size) {
    const std::size_t end = std::min(data.size(), start + options.batch_size);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    Tape tape;
    Var x = tape.constant(data.gather(idx));
    std::vector<double> cond(idx.size(), omega_db);
    // The channel draw uses send_db; conditioning still sees omega_db.
    ChannelSymbols z = model.encode(tape, x, cond);
    const ChannelDraw draw = ChannelDraw::at(send_db);
    Var z_hat = AwgnChannel{}.transmit(z, std::span<const ChannelDraw>(&draw, 1), noise_rng);
    const Tensor& out = model.decode(tape, z_hat, cond).value();
    if (task == Task::kReconstruction) {
      const auto xs = x.value().data();
      const auto ys = out.data();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        total += image_psnr(xs.subspan(i * item, item), ys.subspan(i * item, item));
      }
    } else {
      const auto labels = data.gather_labels(idx);
      total += top1_accuracy(out, labels) * double(idx.size());
    }
  }
  return total / double(data.size());
}

const SweepRow& SweepReport::at(const std::string& metric, double snr_db) const {
  for (const auto& r : rows) {
    if (r.metric == metric && r.snr_db == snr_db) return r;
  }
  throw ContractError(fmt::format("sweep report has no {} row at {} dB", metric, snr_db));
}

std::vector<const SweepRow*> SweepReport::series(const std::string& metric) const {
  std::vector<const SweepRow*> out;
  for (const auto& r : rows) {
    if (r.metric == metric) out.push_back(&r);
  }
  return out;
}

void SweepReport::write_csv(std::ostream& out) const {
  out << "snr_db,metric,mean,std,n\n";
  for (const auto& r : rows) {
    out << fmt::format("{:.6g},{},{:.10f},{:.10f},{}\n", r.snr_db, r.metric, r.mean, r.std, r.n);
  }
}

SweepReport snr_sweep(const HyperAJSCCModel& model, const Dataset& data,
                      std::span<const double> snr_grid, std::span<const std::uint64_t> seeds,
                      const SweepOptions& options) {
  if (snr_grid.empty()) throw ContractError("snr_sweep: empty SNR grid");
  if (seeds.empty()) throw ContractError("snr_sweep: need at least one seed");
  for (std::size_t i = 1; i < snr_grid.size(); ++i) {
    if (!(snr_grid[i] > snr_grid[i - 1])) {
      throw ContractError("snr_sweep: SNR grid must be strictly increasing");
    }
  }
  const std::string metric = metric_name(model.config().task);
  const std::size_t G = snr_grid.size(), S = seeds.size();
  std::vector<double> noisy(G * S), clean(G * S);
  const long total = long(G * S);

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long job = 0; job < total; ++job) {
    try {
      const std::size_t g = std::size_t(job) / S, s = std::size_t(job) % S;
      HyperAJSCCModel local = model;
      Rng rng(derive_seed(derive_seed(seeds[s], stream::kSweep), g));
      EvalOptions eo;
      eo.batch_size = options.batch_size;
      noisy[std::size_t(job)] = evaluate(local, data, snr_grid[g], rng, eo);
      if (options.noiseless_probe) {
        eo.noiseless = true;
        clean[std::size_t(job)] = evaluate(local, data, snr_grid[g], rng, eo);
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  auto summarize = [&](const std::vector<double>& values, std::size_t g, std::string name) {
    double mean = 0.0;
    for (std::size_t s = 0; s < S; ++s) mean += values[g * S + s];
    mean /= double(S);
    double var = 0.0;
    for (std::size_t s = 0; s < S; ++s) var += (values[g * S + s] - mean) * (values[g * S + s] - mean);
    const double sd = S > 1 ? std::sqrt(var / double(S - 1)) : 0.0;
    return SweepRow{snr_grid[g], std::move(name), mean, sd, data.size() * S};
  };

  SweepReport report;
  for (std::size_t g = 0; g < G; ++g) report.rows.push_back(summarize(noisy, g, metric));
  if (options.noiseless_probe) {
    for (std::size_t g = 0; g < G; ++g) {
      report.rows.push_back(summarize(clean, g, metric + "_noiseless"));
    }
  }
  return report;
}

std::vector<GapRow> compare_adaptive_vs_fixed(const SweepReport& adaptive,
                                              const std::map<double, SweepReport>& fixed,
                                              const std::string& metric) {
  std::vector<GapRow> out;
  for (const auto& [train_snr, report] : fixed) {
    const SweepRow* f = nullptr;
    const SweepRow* a = nullptr;
    for (const auto& r : report.rows) {
      if (r.metric == metric && r.snr_db == train_snr) f = &r;
    }
    for (const auto& r : adaptive.rows) {
      if (r.metric == metric && r.snr_db == train_snr) a = &r;
    }
    if (!f || !a) {
      throw ContractError(fmt::format("grid mismatch: no {} point at {} dB in the {} report",
                                      metric, train_snr, f ? "adaptive" : "fixed-model"));
    }
    out.push_back({train_snr, f->mean, a->mean, f->mean - a->mean});
  }
  return out;
}

std::vector<double> parse_snr_grid(const std::string& text) {
  auto num = [&](const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != s.size()) throw ConfigError(fmt::format("bad SNR grid '{}'", text));
    return v;
  };
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw ConfigError(fmt::format("SNR grid '{}' is not lo:hi:step", text));
    const double lo = num(parts[0]), hi = num(parts[1]), step = num(parts[2]);
    if (!(step > 0.0) || hi < lo) throw ConfigError(fmt::format("bad SNR grid '{}'", text));
    const auto count = std::size_t(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) grid.push_back(lo + double(i) * step);
  } else {
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) grid.push_back(num(part));
  }
  if (grid.empty()) throw ConfigError(fmt::format("empty SNR grid '{}'", text));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw ConfigError(fmt::format("SNR grid '{}' is not strictly increasing", text));
    }
  }
  return grid;
}

}  // namespace hajscc
