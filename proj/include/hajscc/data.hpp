#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hajscc/tensor.hpp"

namespace hajscc {

/// Images in [-1, 1], shape [n_items x C x H x W], with optional labels.
struct Dataset {
  Tensor samples;
  std::vector<int> labels;
  std::string name;
  std::string split;

  std::size_t size() const { return samples.empty() ? 0 : samples.dim(0); }
  Shape item_shape() const { return Shape(samples.shape().begin() + 1, samples.shape().end()); }
  bool labeled() const { return !labels.empty(); }

  /// Copies the listed items into a batch tensor (and labels, when present).
  Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  /// First `n` items.
  Dataset head(std::size_t n) const;
};

inline constexpr std::size_t kCifarImageBytes = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;  // 3073

/// u8 pixel -> [-1, 1].
inline double pixel_to_unit(std::uint8_t v) { return 2.0 * (double(v) / 255.0) - 1.0; }

/// Parses one CIFAR-10 binary batch file. `max_items` = 0 reads everything.
Dataset load_cifar10_file(const std::filesystem::path& file, std::size_t max_items = 0);

/// Reads data_batch_1..5.bin and test_batch.bin from `dir`.
/// FormatError on a length that is not a multiple of 3073 bytes,
/// on a label byte > 9, or on a missing batch file.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir,
                                         std::size_t max_train = 0, std::size_t max_test = 0);

enum class SyntheticKind { kBlobImages, kPatternClasses };

/// kBlobImages: smooth low-frequency images (sums of a few coloured Gaussian
/// blobs). kPatternClasses: K families of oriented gratings, labelled, with
/// random phase, contrast and pixel noise. Deterministic given `seed`.
Dataset synthetic_dataset(SyntheticKind kind, std::size_t n_items, const Shape& item_shape,
                          std::size_t num_classes, std::uint64_t seed);

/// Index batches for one epoch: a permutation determined by (seed, epoch),
/// cut into batches of `batch_size`; the last batch may be short.
std::vector<std::vector<std::size_t>> batches(const Dataset& data, std::size_t batch_size,
                                              std::uint64_t shuffle_seed, std::uint64_t epoch);

}  // namespace hajscc
