#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "hajscc/autodiff.hpp"

// Differentiable operations recorded on a Tape. Each op validates shapes,
// computes its forward value, and registers the backward rule.

namespace hajscc::ops {

Var matmul(Var a, Var b);
Var transpose(Var a);

enum class ElementwiseKind { kAdd, kSub, kMul, kScaleRows };

/// add/sub/mul need identical shapes. kScaleRows multiplies slice i along
/// the leading axis of `a` by b[i]; `b` must be a vector of length a.dim(0).
Var elementwise(ElementwiseKind kind, Var a, Var b);
inline Var add(Var a, Var b) { return elementwise(ElementwiseKind::kAdd, a, b); }
inline Var sub(Var a, Var b) { return elementwise(ElementwiseKind::kSub, a, b); }
inline Var mul(Var a, Var b) { return elementwise(ElementwiseKind::kMul, a, b); }
inline Var scale_rows(Var a, Var b) {
  return elementwise(ElementwiseKind::kScaleRows, a, b);
}

Var scale(Var a, double alpha);

/// x[B x D] + bias[D] broadcast over rows.
Var add_bias(Var x, Var bias);

/// x[B x C x ...] with plane (b, c) multiplied by s[b, c].
Var channel_scale(Var x, Var s);

/// s[b, :] = omega[b] * nu + c, for per-sample conditioning values omega.
Var hyper_scale(Var nu, Var c, std::span<const double> omega);

/// Cross-correlation of x[B x Cin x H x W] with kernels[Cout x Cin x K x K]
/// plus per-output-channel bias.
Var conv2d(Var x, Var kernels, Var bias, std::size_t stride, std::size_t padding);

/// Zero-insertion upsampling: y[.., f*i, f*j] = x[.., i, j], zero elsewhere.
/// Followed by a stride-1 conv this realizes a transposed convolution.
Var upsample_zeros(Var x, std::size_t factor);

Var reshape(Var x, Shape shape);

enum class ActivationKind { kNone, kRelu, kTanh, kSigmoid, kSoftmax };

ActivationKind parse_activation(std::string_view name);
std::string_view activation_name(ActivationKind kind);

/// Softmax runs over the last axis. relu'(0) is taken as 0.
Var activation(ActivationKind kind, Var x);
inline Var relu(Var x) { return activation(ActivationKind::kRelu, x); }
inline Var tanh(Var x) { return activation(ActivationKind::kTanh, x); }
inline Var sigmoid(Var x) { return activation(ActivationKind::kSigmoid, x); }
inline Var softmax(Var x) { return activation(ActivationKind::kSoftmax, x); }

Var sum(Var x);
Var mean(Var x);

}  // namespace hajscc::ops
