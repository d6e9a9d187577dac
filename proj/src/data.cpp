#include "hajscc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "hajscc/errors.hpp"
#include "hajscc/random.hpp"

namespace hajscc {

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ContractError("gather: empty index list");
  const std::size_t item = shape_size(item_shape());
  Shape shape{indices.size()};
  const Shape per = item_shape();
  shape.insert(shape.end(), per.begin(), per.end());
  Tensor out(shape);
  auto src = samples.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) {
      throw ContractError(fmt::format("gather: index {} out of range {}", indices[i], size()));
    }
    std::copy_n(src.begin() + indices[i] * item, item, dst.begin() + i * item);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  if (!labeled()) return out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Dataset out;
  out.samples = gather(idx);
  out.labels = gather_labels(idx);
  out.name = name;
  out.split = split;
  return out;
}

Dataset load_cifar10_file(const std::filesystem::path& file, std::size_t max_items) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open CIFAR-10 batch {}", file.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t expected =
        (bytes.size() / kCifarRecordBytes + (bytes.empty() ? 1 : 0)) * kCifarRecordBytes;
    throw FormatError(fmt::format(
        "{}: {} bytes is not a whole number of {}-byte records (nearest valid size {})",
        file.string(), bytes.size(), kCifarRecordBytes, expected));
  }
  std::size_t n = bytes.size() / kCifarRecordBytes;
  if (max_items) n = std::min(n, max_items);

  Dataset ds;
  ds.name = "cifar10";
  ds.split = file.stem().string();
  ds.samples = Tensor(Shape{n, 3, 32, 32});
  ds.labels.resize(n);
  auto px = ds.samples.data();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + i * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError(fmt::format("{}: record {} has label byte {} (> 9), file is corrupt",
                                    file.string(), i, int(rec[0])));
    }
    ds.labels[i] = rec[0];
    // Pixels are channel-planar R, G, B, matching the C x H x W layout.
    for (std::size_t j = 0; j < kCifarImageBytes; ++j) {
      px[i * kCifarImageBytes + j] = pixel_to_unit(rec[1 + j]);
    }
  }
  return ds;
}

namespace {

Dataset concat(std::vector<Dataset> parts, std::string split) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  Dataset out;
  out.name = "cifar10";
  out.split = std::move(split);
  out.samples = Tensor(Shape{total, 3, 32, 32});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.samples.data().begin(), p.samples.data().end(),
              out.samples.data().begin() + offset * kCifarImageBytes);
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    offset += p.size();
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir,
                                         std::size_t max_train, std::size_t max_test) {
  std::vector<Dataset> train_parts;
  std::size_t remaining = max_train;
  for (int b = 1; b <= 5; ++b) {
    const auto file = dir / fmt::format("data_batch_{}.bin", b);
    if (!std::filesystem::exists(file)) {
      throw FormatError(fmt::format("missing CIFAR-10 batch {}", file.string()));
    }
    if (max_train && remaining == 0) break;
    train_parts.push_back(load_cifar10_file(file, remaining));
    if (max_train) remaining -= train_parts.back().size();
  }
  const auto test_file = dir / "test_batch.bin";
  if (!std::filesystem::exists(test_file)) {
    throw FormatError(fmt::format("missing CIFAR-10 batch {}", test_file.string()));
  }
  std::vector<Dataset> test_parts;
  test_parts.push_back(load_cifar10_file(test_file, max_test));
  return {concat(std::move(train_parts), "train"), concat(std::move(test_parts), "test")};
}

namespace {

void blob_image(std::span<double> img, std::size_t C, std::size_t H, std::size_t W, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const double scale = double(std::min(H, W)) / 8.0;
  std::vector<double> offset(C);
  for (auto& o : offset) o = 0.5 * sym(rng);
  std::fill(img.begin(), img.end(), 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t p = 0; p < H * W; ++p) img[c * H * W + p] = offset[c];
  }
  constexpr int kBlobs = 3;
  for (int blob = 0; blob < kBlobs; ++blob) {
    const double cy = unit(rng) * double(H), cx = unit(rng) * double(W);
    const double sigma = (1.0 + 1.5 * unit(rng)) * scale;
    std::vector<double> amp(C);
    for (auto& a : amp) a = sym(rng);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double dy = double(y) + 0.5 - cy, dx = double(x) + 0.5 - cx;
        const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        for (std::size_t c = 0; c < C; ++c) img[(c * H + y) * W + x] += amp[c] * g;
      }
    }
  }
  for (double& v : img) v = std::clamp(v, -1.0, 1.0);
}

void pattern_image(std::span<double> img, int label, std::size_t K, std::size_t C,
                   std::size_t H, std::size_t W, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double theta = std::numbers::pi * double(label) / double(K);
  const double freq = 2.0 * std::numbers::pi / 4.0;  // period of 4 pixels
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double contrast = 0.4 + 0.5 * unit(rng);
  constexpr double kPixelNoise = 0.35;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double u = double(x) * std::cos(theta) + double(y) * std::sin(theta);
        const double v = contrast * std::cos(freq * u + phase) + kPixelNoise * gauss(rng);
        img[(c * H + y) * W + x] = std::clamp(v, -1.0, 1.0);
      }
    }
  }
}

}  // namespace

Dataset synthetic_dataset(SyntheticKind kind, std::size_t n_items, const Shape& item_shape,
                          std::size_t num_classes, std::uint64_t seed) {
  if (n_items == 0) throw ContractError("synthetic_dataset: n_items must be positive");
  if (item_shape.size() != 3) {
    throw ConfigError(fmt::format("synthetic images need C x H x W, got {}", shape_str(item_shape)));
  }
  const std::size_t C = item_shape[0], H = item_shape[1], W = item_shape[2];
  Shape shape{n_items, C, H, W};
  Dataset ds;
  ds.samples = Tensor(shape);
  ds.split = "synthetic";
  Rng rng(derive_seed(seed, stream::kData));
  const std::size_t item = C * H * W;
  auto all = ds.samples.data();
  if (kind == SyntheticKind::kBlobImages) {
    ds.name = "blob-images";
    for (std::size_t i = 0; i < n_items; ++i) blob_image(all.subspan(i * item, item), C, H, W, rng);
  } else {
    if (num_classes < 2) throw ConfigError("pattern classes need K >= 2");
    ds.name = "pattern-classes";
    ds.labels.resize(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
      ds.labels[i] = int(i % num_classes);
      pattern_image(all.subspan(i * item, item), ds.labels[i], num_classes, C, H, W, rng);
    }
  }
  return ds;
}

std::vector<std::vector<std::size_t>> batches(const Dataset& data, std::size_t batch_size,
                                              std::uint64_t shuffle_seed, std::uint64_t epoch) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  const std::size_t n = data.size();
  if (batch_size > n) {
    throw ContractError(fmt::format("batch size {} exceeds dataset size {}", batch_size, n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(derive_seed(shuffle_seed, stream::kShuffle), epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(perm.begin() + long(start), perm.begin() + long(end));
  }
  return out;
}

}  // namespace hajscc
