#pragma once

// Random architectures and an independent hand count of their parameters,
// shared by the unit tests and the acceptance run.

#include <cstddef>
#include <random>
#include <string>

#include <fmt/format.h>

#include "hajscc/models.hpp"

namespace hajscc::testing {

struct HandCount {
  std::size_t base = 0;
  std::size_t introduced = 0;
  std::size_t hyper_channels = 0;  // output channels of layers with a hyper scale
};

/// Counts from the layer specs alone: tracks channels and spatial size
/// through the stack and applies |W0| + |b0| and 2 * out per scaled layer.
inline HandCount hand_count(const ModelConfig& cfg) {
  HandCount hc;
  auto scaled = [&](const LayerSpec& s, std::size_t out) {
    if (!cfg.layer_hyper(s)) return;
    hc.introduced += 2 * out;
    hc.hyper_channels += out;
  };
  auto walk = [&](const std::vector<LayerSpec>& specs, std::size_t c, std::size_t h,
                  std::size_t w, bool flat) {
    for (const LayerSpec& s : specs) {
      const std::size_t k2 = s.kernel * s.kernel;
      switch (s.kind) {
        case LayerSpec::Kind::kDense: {
          const std::size_t in = flat ? c : c * h * w;
          hc.base += in * s.out + s.out;
          scaled(s, s.out);
          c = s.out;
          flat = true;
          break;
        }
        case LayerSpec::Kind::kConv:
          hc.base += c * s.out * k2 + s.out;
          scaled(s, s.out);
          h = (h + 2 * s.padding - s.kernel) / s.stride + 1;
          w = (w + 2 * s.padding - s.kernel) / s.stride + 1;
          c = s.out;
          break;
        case LayerSpec::Kind::kDeconv:
          hc.base += c * s.out * k2 + s.out;
          scaled(s, s.out);
          h = h * s.stride + 2 * s.padding - s.kernel + 1;
          w = w * s.stride + 2 * s.padding - s.kernel + 1;
          c = s.out;
          break;
        case LayerSpec::Kind::kResBlock: {
          hc.base += c * s.out * k2 + s.out + s.out * s.out * k2 + s.out;
          scaled(s, s.out);
          scaled(s, s.out);
          if (c != s.out || s.stride != 1) {
            hc.base += c * s.out + s.out;
            scaled(s, s.out);
          }
          const std::size_t p = s.kernel / 2;
          h = (h + 2 * p - s.kernel) / s.stride + 1;
          w = (w + 2 * p - s.kernel) / s.stride + 1;
          c = s.out;
          break;
        }
        case LayerSpec::Kind::kReshape:
          c = s.reshape[0];
          h = s.reshape[1];
          w = s.reshape[2];
          flat = false;
          break;
      }
    }
  };
  walk(cfg.encoder, cfg.input_shape[0], cfg.input_shape[1], cfg.input_shape[2], false);
  walk(cfg.decoder, 2 * cfg.bandwidth, 1, 1, true);
  return hc;
}

/// A random valid architecture mixing every layer kind, with per-layer hyper
/// flags drawn at random.
inline ModelConfig random_architecture(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1), width(1, 6), kind(0, 3), depth(1, 3);
  auto pick_hyper = [&]() -> std::string {
    const int v = std::uniform_int_distribution<int>(0, 2)(rng);
    return v == 2 ? "" : fmt::format(" hyper={}", v);
  };
  auto L = [](const std::string& s) { return LayerSpec::parse(s); };

  ModelConfig cfg;
  cfg.hyper = coin(rng);
  const std::size_t C = std::size_t(width(rng) % 3 + 1), S = coin(rng) ? 4 : 8;
  cfg.input_shape = {C, S, S};
  cfg.bandwidth = std::size_t(width(rng));
  std::size_t size = S;
  for (int i = depth(rng); i > 0; --i) {
    const int out = width(rng);
    switch (kind(rng)) {
      case 0:
        cfg.encoder.push_back(L(fmt::format("conv out={} k=3 s=1 p=1 act=relu{}", out, pick_hyper())));
        break;
      case 1:
        if (size >= 4) {
          cfg.encoder.push_back(L(fmt::format("conv out={} k=4 s=2 p=1 act=tanh{}", out, pick_hyper())));
          size /= 2;
        } else {
          cfg.encoder.push_back(L(fmt::format("conv out={} k=1 s=1 p=0 act=none{}", out, pick_hyper())));
        }
        break;
      case 2:
        cfg.encoder.push_back(L(fmt::format("resblock out={} k=3 s=1 act=relu{}", out, pick_hyper())));
        break;
      default:
        // Stride-2 residual blocks need odd sizes, which these inputs never have.
        cfg.encoder.push_back(L(fmt::format("resblock out={} k=1 s=1 act=tanh{}", out, pick_hyper())));
        break;
    }
  }
  cfg.encoder.push_back(L(fmt::format("dense out={} act=none{}", 2 * cfg.bandwidth, pick_hyper())));

  if (coin(rng)) {
    cfg.task = Task::kClassification;
    cfg.num_classes = std::size_t(width(rng) + 1);
    cfg.decoder.push_back(L(fmt::format("dense out={} act=relu{}", width(rng), pick_hyper())));
    cfg.decoder.push_back(L(fmt::format("dense out={} act=softmax{}", cfg.num_classes, pick_hyper())));
  } else {
    cfg.task = Task::kReconstruction;
    const std::size_t mid = std::size_t(width(rng)), half = S / 2;
    cfg.decoder.push_back(L(fmt::format("dense out={} act=relu{}", mid * half * half, pick_hyper())));
    cfg.decoder.push_back(L(fmt::format("reshape {}x{}x{}", mid, half, half)));
    cfg.decoder.push_back(L(fmt::format("deconv out={} k=3 s=2 p=1 act=relu{}", width(rng), pick_hyper())));
    cfg.decoder.push_back(L(fmt::format("conv out={} k=3 s=1 p=1 act=tanh{}", C, pick_hyper())));
  }
  return cfg;
}

}  // namespace hajscc::testing
