#include "hajscc/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "hajscc/errors.hpp"
#include "hajscc/metrics.hpp"

namespace hajscc {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Parser state: the location prefix makes every diagnostic point at a line.
struct Cursor {
  std::string origin;
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(fmt::format("{}:{}: {}", origin, line, msg));
  }
};

double to_double(const Cursor& at, const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) at.fail(fmt::format("'{}' needs a number, got '{}'", key, v));
  return out;
}

std::uint64_t to_u64(const Cursor& at, const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    at.fail(fmt::format("'{}' needs a non-negative integer, got '{}'", key, v));
  }
  return out;
}

bool to_bool(const Cursor& at, const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  at.fail(fmt::format("'{}' needs true/false, got '{}'", key, v));
}

Shape to_dims(const Cursor& at, const std::string& key, const std::string& v) {
  Shape dims;
  std::istringstream in(v);
  std::string part;
  while (std::getline(in, part, 'x')) dims.push_back(to_u64(at, key, trim(part)));
  if (dims.size() != 3) at.fail(fmt::format("'{}' needs CxHxW, got '{}'", key, v));
  for (auto d : dims) {
    if (d == 0) at.fail(fmt::format("'{}' has a zero dimension", key));
  }
  return dims;
}

std::vector<double> to_list(const Cursor& at, const std::string& key, const std::string& v) {
  try {
    return parse_snr_grid(v);
  } catch (const ConfigError& e) {
    at.fail(fmt::format("'{}': {}", key, e.what()));
  }
}

std::string join_doubles(const std::vector<double>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  cfg.model.encoder.clear();
  cfg.model.decoder.clear();
  Cursor at{origin, 0};
  std::string section;
  std::set<std::string> seen;
  bool have_train_loss = false;

  const std::set<std::string> sections{"model", "encoder", "decoder", "train", "data", "eval"};
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++at.line;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') at.fail(fmt::format("malformed section header '{}'", line));
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) at.fail(fmt::format("unknown section [{}]", section));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) at.fail(fmt::format("expected key = value, got '{}'", line));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) at.fail(fmt::format("key '{}' outside any section", key));
    if (value.empty()) at.fail(fmt::format("key '{}' has no value", key));
    const std::string full = section + "." + key;
    const bool repeatable = (section == "encoder" || section == "decoder") && key == "layer";
    if (!repeatable && !seen.insert(full).second) at.fail(fmt::format("duplicate key '{}'", full));

    auto unknown = [&]() { at.fail(fmt::format("unknown key '{}' in [{}]", key, section)); };
    try {
      if (section == "model") {
        if (key == "task") {
          cfg.model.task = parse_task(value);
        } else if (key == "input") {
          cfg.model.input_shape = to_dims(at, key, value);
        } else if (key == "bandwidth") {
          cfg.model.bandwidth = to_u64(at, key, value);
        } else if (key == "classes") {
          cfg.model.num_classes = to_u64(at, key, value);
        } else if (key == "hyper") {
          cfg.model.hyper = to_bool(at, key, value);
        } else if (key == "omega_range") {
          std::istringstream r(value);
          std::string lo, hi, extra;
          if (!(r >> lo >> hi) || (r >> extra)) at.fail("omega_range needs 'LO HI' in dB");
          cfg.model.omega_lo_db = to_double(at, key, lo);
          cfg.model.omega_hi_db = to_double(at, key, hi);
          (void)cfg.model.omega_map();
        } else {
          unknown();
        }
      } else if (section == "encoder" || section == "decoder") {
        if (key != "layer") unknown();
        auto& list = section == "encoder" ? cfg.model.encoder : cfg.model.decoder;
        list.push_back(LayerSpec::parse(value));
      } else if (section == "train") {
        auto& t = cfg.train;
        if (key == "epochs") {
          t.epochs = to_u64(at, key, value);
        } else if (key == "batch_size") {
          t.batch_size = to_u64(at, key, value);
        } else if (key == "lr") {
          t.adam.lr = to_double(at, key, value);
        } else if (key == "beta1") {
          t.adam.beta1 = to_double(at, key, value);
        } else if (key == "beta2") {
          t.adam.beta2 = to_double(at, key, value);
        } else if (key == "eps") {
          t.adam.eps = to_double(at, key, value);
        } else if (key == "prior") {
          t.prior = SnrPrior::parse(value);
        } else if (key == "loss") {
          if (value == "mse") {
            t.loss = LossKind::kMse;
          } else if (value == "cross_entropy") {
            t.loss = LossKind::kCrossEntropy;
          } else {
            at.fail(fmt::format("loss must be mse or cross_entropy, got '{}'", value));
          }
          have_train_loss = true;
        } else if (key == "seed") {
          t.seed = to_u64(at, key, value);
        } else if (key == "val_every") {
          t.val_every = to_u64(at, key, value);
        } else if (key == "val_grid") {
          t.val_grid = to_list(at, key, value);
        } else {
          unknown();
        }
      } else if (section == "data") {
        auto& d = cfg.data;
        if (key == "source") {
          if (value == "synthetic") {
            d.source = DataConfig::Source::kSynthetic;
          } else if (value == "cifar10") {
            d.source = DataConfig::Source::kCifar10;
          } else {
            at.fail(fmt::format("source must be synthetic or cifar10, got '{}'", value));
          }
        } else if (key == "kind") {
          if (value == "blobs") {
            d.kind = SyntheticKind::kBlobImages;
          } else if (value == "patterns") {
            d.kind = SyntheticKind::kPatternClasses;
          } else {
            at.fail(fmt::format("kind must be blobs or patterns, got '{}'", value));
          }
        } else if (key == "n_train") {
          d.n_train = to_u64(at, key, value);
        } else if (key == "n_test") {
          d.n_test = to_u64(at, key, value);
        } else if (key == "seed") {
          d.seed = to_u64(at, key, value);
        } else if (key == "path") {
          d.path = value;
        } else {
          unknown();
        }
      } else if (section == "eval") {
        if (key == "grid") {
          cfg.eval.grid = to_list(at, key, value);
        } else if (key == "seeds") {
          cfg.eval.seeds.clear();
          std::istringstream s(value);
          std::string part;
          while (std::getline(s, part, ',')) cfg.eval.seeds.push_back(to_u64(at, key, trim(part)));
          if (cfg.eval.seeds.empty()) at.fail("seeds needs at least one value");
        } else {
          unknown();
        }
      }
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.rfind(origin + ":", 0) == 0) throw;
      at.fail(msg);
    }
  }

  at.line = 0;
  if (!have_train_loss) cfg.train.loss = default_loss(cfg.model.task);
  if (cfg.data.source == DataConfig::Source::kCifar10) {
    if (cfg.data.path.empty()) at.fail("[data] source = cifar10 needs path");
    if (!std::filesystem::is_directory(cfg.data.path)) {
      at.fail(fmt::format("[data] path '{}' is not a directory", cfg.data.path.string()));
    }
  }
  if (cfg.data.n_train == 0 || cfg.data.n_test == 0) at.fail("[data] n_train/n_test must be positive");
  try {
    cfg.train.validate();
    (void)build_model(cfg.model, 0);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", origin, e.what()));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", file.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), file.string());
}

std::string model_canonical(const ModelConfig& m) {
  std::string out;
  out += "[model]\n";
  out += fmt::format("task = {}\n", task_name(m.task));
  out += fmt::format("input = {}\n", fmt::join(m.input_shape, "x"));
  out += fmt::format("bandwidth = {}\n", m.bandwidth);
  if (m.task == Task::kClassification) out += fmt::format("classes = {}\n", m.num_classes);
  out += fmt::format("hyper = {}\n", m.hyper ? "true" : "false");
  out += fmt::format("omega_range = {} {}\n", m.omega_lo_db, m.omega_hi_db);
  out += "\n[encoder]\n";
  for (const auto& l : m.encoder) out += fmt::format("layer = {}\n", l.describe());
  out += "\n[decoder]\n";
  for (const auto& l : m.decoder) out += fmt::format("layer = {}\n", l.describe());
  return out;
}

std::string model_digest(const ModelConfig& model) {
  const std::string text = model_canonical(model);
  return fmt::format("{:016x}", fnv1a64(text.data(), text.size()));
}

std::string RunConfig::canonical() const {
  std::string out = model_canonical(model);
  out += "\n[train]\n";
  out += fmt::format("epochs = {}\n", train.epochs);
  out += fmt::format("batch_size = {}\n", train.batch_size);
  out += fmt::format("lr = {}\n", train.adam.lr);
  out += fmt::format("beta1 = {}\n", train.adam.beta1);
  out += fmt::format("beta2 = {}\n", train.adam.beta2);
  out += fmt::format("eps = {}\n", train.adam.eps);
  out += fmt::format("prior = {}\n", train.prior.describe());
  out += fmt::format("loss = {}\n", train.loss == LossKind::kMse ? "mse" : "cross_entropy");
  out += fmt::format("seed = {}\n", train.seed);
  out += fmt::format("val_every = {}\n", train.val_every);
  out += fmt::format("val_grid = {}\n", join_doubles(train.val_grid));
  out += "\n[data]\n";
  out += fmt::format("source = {}\n",
                     data.source == DataConfig::Source::kSynthetic ? "synthetic" : "cifar10");
  if (data.kind) {
    out += fmt::format("kind = {}\n", *data.kind == SyntheticKind::kBlobImages ? "blobs" : "patterns");
  }
  out += fmt::format("n_train = {}\n", data.n_train);
  out += fmt::format("n_test = {}\n", data.n_test);
  out += fmt::format("seed = {}\n", data.seed);
  if (!data.path.empty()) out += fmt::format("path = {}\n", data.path.string());
  out += "\n[eval]\n";
  out += fmt::format("grid = {}\n", join_doubles(eval.grid));
  out += fmt::format("seeds = {}\n", fmt::join(eval.seeds, ","));
  return out;
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& config) {
  const auto& m = config.model;
  const auto& d = config.data;
  if (d.source == DataConfig::Source::kCifar10) {
    if (m.input_shape != Shape{3, 32, 32}) {
      throw ConfigError("cifar10 data needs model input 3x32x32");
    }
    if (m.task == Task::kClassification && m.num_classes != 10) {
      throw ConfigError("cifar10 classification needs classes = 10");
    }
    return load_cifar10(d.path, d.n_train, d.n_test);
  }
  const SyntheticKind kind = d.kind.value_or(m.task == Task::kClassification
                                                 ? SyntheticKind::kPatternClasses
                                                 : SyntheticKind::kBlobImages);
  if (m.task == Task::kClassification && kind != SyntheticKind::kPatternClasses) {
    throw ConfigError("classification needs labelled data (kind = patterns)");
  }
  const std::size_t K = m.task == Task::kClassification ? m.num_classes : 2;
  Dataset train = synthetic_dataset(kind, d.n_train, m.input_shape, K, d.seed);
  Dataset test = synthetic_dataset(kind, d.n_test, m.input_shape, K, derive_seed(d.seed, 1000));
  train.split = "train";
  test.split = "test";
  return {std::move(train), std::move(test)};
}

}  // namespace hajscc
