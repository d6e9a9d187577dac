// hajscc: train, evaluate, sweep, count-params and gradcheck.
//
// Exit codes: 0 ok, 1 other failure, 2 invalid config or usage,
// 3 numeric abort (non-finite loss), 4 corrupt artifact, 5 gradcheck failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hajscc/checkpoint.hpp"
#include "hajscc/config.hpp"
#include "hajscc/errors.hpp"
#include "hajscc/gradcheck.hpp"
#include "hajscc/metrics.hpp"
#include "hajscc/report.hpp"
#include "hajscc/training.hpp"

namespace fs = std::filesystem;
using namespace hajscc;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kNumeric = 3, kCorrupt = 4, kGradcheck = 5 };

struct CheckpointArgs {
  std::string path;
  std::string config;
  bool force = false;
};

LoadedCheckpoint open_checkpoint(const CheckpointArgs& a) {
  std::optional<RunConfig> expected;
  if (!a.config.empty()) expected = RunConfig::load(a.config);
  return load_checkpoint(a.path, expected ? &*expected : nullptr, a.force);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
}

bool is_checkpoint_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::equal(magic, magic + 4, kCheckpointMagic);
}

std::string kb(std::size_t bytes) { return fmt::format("{:.2f} KB", double(bytes) / 1024.0); }

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const fs::path& out_dir) {
  RunConfig cfg = RunConfig::load(config_path);
  if (seed) cfg.train.seed = *seed;
  auto [train_set, test_set] = load_datasets(cfg);
  HyperAJSCCModel model = build_model(cfg.model, cfg.train.seed);
  TrainLog log = train(model, train_set, &test_set, cfg.train);
  log.config_digest = model_digest(cfg.model);

  fs::create_directories(out_dir);
  save_checkpoint(out_dir / "model.ckpt", model, cfg);
  std::ostringstream csv;
  log.write_csv(csv);
  write_file(out_dir / "train_log.csv", csv.str());
  write_file(out_dir / "config.conf", cfg.canonical());

  const ParamReport params = model.count_params();
  fmt::print(
      "trained {} model: final loss {:.6f}, {} epochs / {} steps, params {} (base {} + "
      "introduced {}), wall {:.1f} s, digest {}, artifacts in {}\n",
      task_name(cfg.model.task), log.epochs.back().loss, log.epochs.size(), log.steps,
      params.total(), params.total_base, params.total_introduced, log.wall_seconds,
      log.config_digest, out_dir.string());
  return kOk;
}

int cmd_evaluate(const CheckpointArgs& ck, double snr_db, std::uint64_t seed) {
  LoadedCheckpoint loaded = open_checkpoint(ck);
  auto [train_set, test_set] = load_datasets(loaded.config);
  Rng rng(derive_seed(seed, stream::kSweep));
  const double value = evaluate(loaded.model, test_set, snr_db, rng);
  fmt::print("{} at {:g} dB: {:.6f} (n={})\n", metric_name(loaded.config.model.task), snr_db, value,
             test_set.size());
  return kOk;
}

int cmd_sweep(const CheckpointArgs& ck, const std::string& grid_text,
              const std::string& seeds_text, const std::string& csv_path,
              const std::string& svg_path, bool probe) {
  LoadedCheckpoint loaded = open_checkpoint(ck);
  const RunConfig& cfg = loaded.config;
  std::vector<double> grid = grid_text.empty() ? cfg.eval.grid : parse_snr_grid(grid_text);
  std::vector<std::uint64_t> seeds = cfg.eval.seeds;
  if (!seeds_text.empty()) {
    seeds.clear();
    std::istringstream in(seeds_text);
    std::string part;
    while (std::getline(in, part, ',')) {
      try {
        std::size_t pos = 0;
        seeds.push_back(std::stoull(part, &pos));
        if (pos != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("bad --seeds entry '{}'", part));
      }
    }
  }
  auto [train_set, test_set] = load_datasets(cfg);
  SweepOptions opts;
  opts.noiseless_probe = probe;
  SweepReport report = snr_sweep(loaded.model, test_set, grid, seeds, opts);
  report.model_digest = model_digest(cfg.model);

  std::ostringstream csv;
  report.write_csv(csv);
  if (csv_path.empty()) {
    std::cout << csv.str();
  } else {
    write_file(csv_path, csv.str());
  }
  if (!svg_path.empty()) {
    const std::string metric = metric_name(cfg.model.task);
    ChartSpec chart;
    chart.title = fmt::format("{} vs test SNR ({})", metric, fs::path(ck.path).filename().string());
    chart.y_label = metric == "psnr" ? "PSNR (dB)" : "top-1 accuracy";
    for (const std::string& name : {metric, metric + "_noiseless"}) {
      ChartSeries s;
      s.label = name;
      for (const SweepRow* r : report.series(name)) {
        s.x.push_back(r->snr_db);
        s.y.push_back(r->mean);
      }
      if (!s.x.empty()) chart.series.push_back(std::move(s));
    }
    write_file(svg_path, render_svg(chart));
  }
  return kOk;
}

int cmd_count_params(const std::string& input) {
  std::optional<HyperAJSCCModel> model;
  if (is_checkpoint_file(input)) {
    model.emplace(load_checkpoint(input).model);
  } else {
    model.emplace(build_model(RunConfig::load(input).model, 0));
  }
  const ParamReport r = model->count_params();
  fmt::print("{:<8} {:<44} {:>10} {:>11}\n", "layer", "spec", "base", "introduced");
  for (const auto& row : r.layers) {
    fmt::print("{:<8} {:<44} {:>10} {:>11}\n", row.name, row.kind, row.base, row.introduced);
  }
  fmt::print("{:<8} {:<44} {:>10} {:>11}\n", "total", "", r.total_base, r.total_introduced);
  fmt::print("storage at 32 bit: base {} B ({}), introduced {} B ({}), total {} B ({})\n",
             4 * r.total_base, kb(4 * r.total_base), r.introduced_bytes_at_32bit(),
             kb(r.introduced_bytes_at_32bit()), r.bytes_at_32bit(), kb(r.bytes_at_32bit()));
  fmt::print("introduced / base: {:.2f}%\n", 100.0 * r.introduced_ratio());
  return kOk;
}

int cmd_gradcheck(const std::string& size, std::uint64_t seed, bool inject_fault, double step) {
  GradcheckOptions opts;
  opts.step = step;
  opts.size = size == "tiny" ? SuiteSize::kTiny : SuiteSize::kSmall;
  opts.seed = seed;
  opts.inject_fault = inject_fault;
  const GradcheckReport report = run_gradcheck_suite(opts);
  std::cout << report.format();
  return report.passed() ? kOk : kGradcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-adaptive deep joint source-channel coding with hyper-scaled layers"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "run";
  std::uint64_t seed_value = 1;
  CheckpointArgs ck;
  double snr_db = 10.0, fd_step = 1e-5;
  std::string grid_text, seeds_text, csv_path, svg_path, size = "small", count_input;
  bool probe = false, inject_fault = false;

  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("config", config_path, "run config")->required();
  auto* train_seed = train_cmd->add_option("--seed", seed_value, "override [train] seed");
  train_cmd->add_option("--out", out_dir, "output directory");

  auto add_checkpoint = [&](CLI::App* cmd) {
    cmd->add_option("checkpoint", ck.path, "checkpoint file")->required();
    cmd->add_option("--config", ck.config, "config the checkpoint must match");
    cmd->add_flag("--force", ck.force, "load despite a model digest mismatch");
  };

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint at one test SNR");
  add_checkpoint(eval_cmd);
  eval_cmd->add_option("--snr", snr_db, "test SNR in dB");
  eval_cmd->add_option("--seed", seed_value, "channel noise seed");

  auto* sweep_cmd = app.add_subcommand("sweep", "metric vs test SNR");
  add_checkpoint(sweep_cmd);
  sweep_cmd->add_option("--snr-grid", grid_text, "lo:hi:step or a comma list (default: config)");
  sweep_cmd->add_option("--seeds", seeds_text, "comma-separated noise seeds (default: config)");
  sweep_cmd->add_option("--csv", csv_path, "CSV output (default: stdout)");
  sweep_cmd->add_option("--svg", svg_path, "SVG chart output");
  sweep_cmd->add_flag("--probe-noiseless", probe, "add a noiseless-channel column per SNR");

  auto* count_cmd = app.add_subcommand("count-params", "base vs introduced parameters");
  count_cmd->add_option("input", count_input, "checkpoint or config file")->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad_cmd->add_option("--size", size, "tiny or small")
      ->check(CLI::IsMember({"tiny", "small"}));
  grad_cmd->add_option("--seed", seed_value, "case seed");
  grad_cmd->add_option("--step", fd_step, "finite-difference step h");
  grad_cmd->add_flag("--inject-fault", inject_fault, "add a deliberately wrong backward rule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) {
      return cmd_train(config_path,
                       train_seed->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt,
                       out_dir);
    }
    if (*eval_cmd) return cmd_evaluate(ck, snr_db, seed_value);
    if (*sweep_cmd) return cmd_sweep(ck, grid_text, seeds_text, csv_path, svg_path, probe);
    if (*count_cmd) return cmd_count_params(count_input);
    if (*grad_cmd) return cmd_gradcheck(size, seed_value, inject_fault, fd_step);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const NumericError& e) {
    fmt::print(stderr, "numeric abort: {}\n", e.what());
    return kNumeric;
  } catch (const FormatError& e) {
    fmt::print(stderr, "corrupt artifact: {}\n", e.what());
    return kCorrupt;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kOther;
  }
  return kOther;
}
