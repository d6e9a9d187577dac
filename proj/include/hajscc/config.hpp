#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hajscc/data.hpp"
#include "hajscc/models.hpp"
#include "hajscc/training.hpp"

namespace hajscc {

struct DataConfig {
  enum class Source { kSynthetic, kCifar10 };

  Source source = Source::kSynthetic;
  std::optional<SyntheticKind> kind;  // unset: blobs for reconstruction, patterns for classification
  std::size_t n_train = 512;
  std::size_t n_test = 256;
  std::uint64_t seed = 7;
  std::filesystem::path path;  // CIFAR-10 directory
};

struct EvalConfig {
  std::vector<double> grid{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  std::vector<std::uint64_t> seeds{1};
};

/// Everything a run needs, parsed from a sectioned key = value file:
///
///   [model]    task, input, bandwidth, classes, hyper, omega_range
///   [encoder]  layer = <layer spec>   (repeatable, in order)
///   [decoder]  layer = <layer spec>
///   [train]    epochs, batch_size, lr, beta1, beta2, eps, prior, loss, seed,
///              val_every, val_grid
///   [data]     source, kind, n_train, n_test, seed, path
///   [eval]     grid, seeds
///
/// '#' starts a comment. Unknown sections or keys and repeated scalar keys
/// are rejected with the offending line number.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;

  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::filesystem::path& file);

  /// Normalized text; parse(canonical()) reproduces this config.
  std::string canonical() const;
};

/// Canonical text of the architecture sections only ([model], [encoder],
/// [decoder]); two configs with equal model text build interchangeable models.
std::string model_canonical(const ModelConfig& model);

/// FNV-1a 64 of model_canonical(), as 16 hex digits.
std::string model_digest(const ModelConfig& model);

std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Builds the train/test datasets a config names. Throws ConfigError when the
/// data cannot serve the task (e.g. unlabelled blobs for classification).
std::pair<Dataset, Dataset> load_datasets(const RunConfig& config);

}  // namespace hajscc
