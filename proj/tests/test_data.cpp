#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <unistd.h>

#include "hajscc/data.hpp"
#include "hajscc/errors.hpp"
#include "hajscc/layers.hpp"
#include "hajscc/metrics.hpp"
#include "hajscc/training.hpp"

using namespace hajscc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("hajscc_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// One CIFAR record: label, then planar R, G, B with pixel value `base + channel`.
std::string cifar_record(std::uint8_t label, std::uint8_t base) {
  std::string rec(kCifarRecordBytes, '\0');
  rec[0] = char(label);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j = 0; j < 1024; ++j) rec[1 + c * 1024 + j] = char(base + c);
  }
  return rec;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST_CASE("CIFAR record size and pixel endpoints") {
  CHECK(kCifarRecordBytes == 3073);
  CHECK(pixel_to_unit(0) == -1.0);
  CHECK(pixel_to_unit(255) == 1.0);
}

TEST_CASE("CIFAR batch parsing") {
  TempDir dir("cifar");
  const fs::path file = dir.path / "batch.bin";
  write_bytes(file, cifar_record(3, 0) + cifar_record(9, 253));
  const Dataset d = load_cifar10_file(file);
  REQUIRE(d.size() == 2);
  CHECK(d.labels == std::vector<int>{3, 9});
  CHECK(d.item_shape() == Shape{3, 32, 32});
  CHECK(d.samples[0] == -1.0);                                    // R of image 0
  CHECK(d.samples[1024] == pixel_to_unit(1));                     // G of image 0
  CHECK(d.samples[kCifarImageBytes + 2 * 1024 + 5] == 1.0);       // B of image 1
  CHECK(load_cifar10_file(file, 1).size() == 1);
}

TEST_CASE("CIFAR loader rejects bad lengths and labels") {
  TempDir dir("cifar_bad");
  const fs::path shortf = dir.path / "short.bin";
  write_bytes(shortf, cifar_record(1, 0) + std::string(100, '\0'));
  CHECK_THROWS_WITH_AS(load_cifar10_file(shortf), doctest::Contains("3173 bytes"), FormatError);
  const fs::path empty = dir.path / "empty.bin";
  write_bytes(empty, "");
  CHECK_THROWS_AS(load_cifar10_file(empty), FormatError);
  const fs::path label = dir.path / "label.bin";
  write_bytes(label, cifar_record(1, 0) + cifar_record(10, 0));
  CHECK_THROWS_WITH_AS(load_cifar10_file(label), doctest::Contains("label byte 10"), FormatError);
  CHECK_THROWS_AS(load_cifar10_file(dir.path / "missing.bin"), FormatError);
}

TEST_CASE("CIFAR directory loading") {
  TempDir dir("cifar_dir");
  for (int b = 1; b <= 5; ++b) {
    write_bytes(dir.path / ("data_batch_" + std::to_string(b) + ".bin"),
                cifar_record(std::uint8_t(b), 10) + cifar_record(0, 20));
  }
  CHECK_THROWS_AS(load_cifar10(dir.path), FormatError);  // no test batch yet
  write_bytes(dir.path / "test_batch.bin", cifar_record(7, 30));
  auto [train, test] = load_cifar10(dir.path);
  CHECK(train.size() == 10);
  CHECK(test.size() == 1);
  CHECK(train.labels[2] == 2);
  auto [train3, test1] = load_cifar10(dir.path, 3, 1);
  CHECK(train3.size() == 3);
  CHECK(test1.labels == std::vector<int>{7});
}

TEST_CASE("synthetic datasets are deterministic and in range") {
  for (SyntheticKind kind : {SyntheticKind::kBlobImages, SyntheticKind::kPatternClasses}) {
    const Dataset a = synthetic_dataset(kind, 50, {3, 8, 8}, 3, 9);
    const Dataset b = synthetic_dataset(kind, 50, {3, 8, 8}, 3, 9);
    const Dataset c = synthetic_dataset(kind, 50, {3, 8, 8}, 3, 10);
    CHECK(a.samples.values() == b.samples.values());
    CHECK(a.labels == b.labels);
    CHECK(a.samples.values() != c.samples.values());
    for (double v : a.samples.data()) CHECK((std::isfinite(v) && v >= -1.0 && v <= 1.0));
    if (kind == SyntheticKind::kPatternClasses) {
      REQUIRE(a.labels.size() == 50);
      std::set<int> seen(a.labels.begin(), a.labels.end());
      CHECK(seen == std::set<int>{0, 1, 2});
    } else {
      CHECK_FALSE(a.labeled());
    }
  }
  CHECK_THROWS_AS(synthetic_dataset(SyntheticKind::kBlobImages, 0, {3, 8, 8}, 0, 1), ContractError);
  CHECK_THROWS_AS(synthetic_dataset(SyntheticKind::kPatternClasses, 4, {3, 8, 8}, 1, 1), ConfigError);
}

TEST_CASE("batches partition each epoch") {
  const Dataset d = synthetic_dataset(SyntheticKind::kBlobImages, 10, {1, 4, 4}, 0, 1);
  const auto plan = batches(d, 4, 7, 1);
  REQUIRE(plan.size() == 3);
  CHECK(plan[0].size() == 4);
  CHECK(plan[1].size() == 4);
  CHECK(plan[2].size() == 2);
  std::multiset<std::size_t> all;
  for (const auto& b : plan) all.insert(b.begin(), b.end());
  CHECK(all == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  CHECK(batches(d, 4, 7, 1) == plan);
  CHECK(batches(d, 4, 7, 2) != plan);
  const auto whole = batches(d, 10, 7, 1);
  REQUIRE(whole.size() == 1);
  CHECK(std::set<std::size_t>(whole[0].begin(), whole[0].end()).size() == 10);
  CHECK_THROWS_AS(batches(d, 0, 7, 1), ContractError);
  CHECK_THROWS_AS(batches(d, 11, 7, 1), ContractError);
}

TEST_CASE("gather copies items and labels") {
  const Dataset d = synthetic_dataset(SyntheticKind::kPatternClasses, 6, {1, 4, 4}, 2, 3);
  std::vector<std::size_t> idx{4, 1};
  const Tensor x = d.gather(idx);
  CHECK(x.shape() == Shape{2, 1, 4, 4});
  for (std::size_t j = 0; j < 16; ++j) CHECK(x[j] == d.samples[4 * 16 + j]);
  CHECK(d.gather_labels(idx) == std::vector<int>{d.labels[4], d.labels[1]});
  std::vector<std::size_t> bad{6};
  CHECK_THROWS_AS(d.gather(bad), ContractError);
  CHECK(d.head(3).size() == 3);
}

TEST_CASE("two-class patterns are separable by a small dense probe") {
  const Dataset train = synthetic_dataset(SyntheticKind::kPatternClasses, 512, {1, 8, 8}, 2, 11);
  const Dataset test = synthetic_dataset(SyntheticKind::kPatternClasses, 256, {1, 8, 8}, 2, 12);
  Rng rng(5);
  HyperLayer l1(DenseLayer::init(64, 16, ActivationKind::kRelu, rng), std::nullopt);
  HyperLayer l2(DenseLayer::init(16, 2, ActivationKind::kSoftmax, rng), std::nullopt);
  std::vector<Tensor*> params{&l1.dense().W0, &l1.dense().b0, &l2.dense().W0, &l2.dense().b0};
  for (Tensor* p : params) p->set_requires_grad(true);
  OptimizerState opt;
  AdamConfig adam;
  adam.lr = 1e-2;
  const double w = 0.0;
  std::size_t steps = 0;
  for (std::size_t epoch = 1; steps < 400; ++epoch) {
    for (const auto& idx : batches(train, 32, 1, epoch)) {
      for (Tensor* p : params) p->zero_grad();
      Tape tape;
      Var h = l1.forward(tape, tape.constant(train.gather(idx)), w);
      Var probs = l2.forward(tape, h, w);
      tape.backward(cross_entropy_loss(probs, train.gather_labels(idx)));
      adam_update(opt, params, adam);
      if (++steps == 400) break;
    }
  }
  Tape tape;
  Var probs = l2.forward(tape, l1.forward(tape, tape.constant(test.samples), w), w);
  const double acc = top1_accuracy(probs.value(), test.labels);
  MESSAGE("probe accuracy " << acc);
  CHECK(acc > 0.9);
}
