#include "hajscc/ops.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hajscc/errors.hpp"
#include "hajscc/kernels.hpp"

namespace hajscc::ops {

namespace {

void same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ContractError("op inputs must live on the same tape");
  }
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(
      fmt::format("{}: incompatible shapes {} and {}", op, shape_str(a), shape_str(b)));
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    shape_mismatch("matmul", A.shape(), B.shape());
  }
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out(Shape{m, n});
  kernels::matmul(m, k, n, A.data(), B.data(), out.data());
  return a.tape->record(std::move(out), {a.id, b.id}, [m, k, n](GradContext& g) {
    if (!g.in_grad[0].empty()) {
      kernels::matmul_grad_a(m, k, n, g.out_grad, g.in[1]->data(), g.in_grad[0]);
    }
    if (!g.in_grad[1].empty()) {
      kernels::matmul_grad_b(m, k, n, g.in[0]->data(), g.out_grad, g.in_grad[1]);
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  if (A.rank() != 2) {
    throw DimensionError(fmt::format("transpose needs a matrix, got {}", shape_str(A.shape())));
  }
  const std::size_t r = A.dim(0), c = A.dim(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  }
  return a.tape->record(std::move(out), {a.id}, [r, c](GradContext& g) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) g.in_grad[0][i * c + j] += g.out_grad[j * r + i];
    }
  });
}

Var elementwise(ElementwiseKind kind, Var a, Var b) {
  same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t n = A.size();

  if (kind == ElementwiseKind::kScaleRows) {
    if (B.rank() != 1 || B.dim(0) != A.dim(0)) shape_mismatch("scale_rows", A.shape(), B.shape());
    const std::size_t rows = A.dim(0), inner = n / rows;
    Tensor out(A.shape());
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < inner; ++j) out[i * inner + j] = A[i * inner + j] * B[i];
    }
    return a.tape->record(std::move(out), {a.id, b.id}, [rows, inner](GradContext& g) {
      const Tensor& A = *g.in[0];
      const Tensor& B = *g.in[1];
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < inner; ++j) {
          const double go = g.out_grad[i * inner + j];
          if (!g.in_grad[0].empty()) g.in_grad[0][i * inner + j] += go * B[i];
          if (!g.in_grad[1].empty()) g.in_grad[1][i] += go * A[i * inner + j];
        }
      }
    });
  }

  if (A.shape() != B.shape()) shape_mismatch("elementwise", A.shape(), B.shape());
  Tensor out(A.shape());
  switch (kind) {
    case ElementwiseKind::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = A[i] + B[i];
      break;
    case ElementwiseKind::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = A[i] - B[i];
      break;
    case ElementwiseKind::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = A[i] * B[i];
      break;
    case ElementwiseKind::kScaleRows:
      break;
  }
  return a.tape->record(std::move(out), {a.id, b.id}, [kind, n](GradContext& g) {
    auto ga = g.in_grad[0];
    auto gb = g.in_grad[1];
    switch (kind) {
      case ElementwiseKind::kAdd:
        if (!ga.empty()) for (std::size_t i = 0; i < n; ++i) ga[i] += g.out_grad[i];
        if (!gb.empty()) for (std::size_t i = 0; i < n; ++i) gb[i] += g.out_grad[i];
        break;
      case ElementwiseKind::kSub:
        if (!ga.empty()) for (std::size_t i = 0; i < n; ++i) ga[i] += g.out_grad[i];
        if (!gb.empty()) for (std::size_t i = 0; i < n; ++i) gb[i] -= g.out_grad[i];
        break;
      case ElementwiseKind::kMul:
        if (!ga.empty()) for (std::size_t i = 0; i < n; ++i) ga[i] += g.out_grad[i] * (*g.in[1])[i];
        if (!gb.empty()) for (std::size_t i = 0; i < n; ++i) gb[i] += g.out_grad[i] * (*g.in[0])[i];
        break;
      case ElementwiseKind::kScaleRows:
        break;
    }
  });
}

Var scale(Var a, double alpha) {
  const Tensor& A = a.value();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = alpha * A[i];
  return a.tape->record(std::move(out), {a.id}, [alpha](GradContext& g) {
    for (std::size_t i = 0; i < g.out_grad.size(); ++i) g.in_grad[0][i] += alpha * g.out_grad[i];
  });
}

Var add_bias(Var x, Var bias) {
  same_tape(x, bias);
  const Tensor& X = x.value();
  const Tensor& B = bias.value();
  if (X.rank() != 2 || B.rank() != 1 || B.dim(0) != X.dim(1)) {
    shape_mismatch("add_bias", X.shape(), B.shape());
  }
  const std::size_t rows = X.dim(0), cols = X.dim(1);
  Tensor out(X.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = X[i * cols + j] + B[j];
  }
  return x.tape->record(std::move(out), {x.id, bias.id}, [rows, cols](GradContext& g) {
    if (!g.in_grad[0].empty()) {
      for (std::size_t i = 0; i < rows * cols; ++i) g.in_grad[0][i] += g.out_grad[i];
    }
    if (!g.in_grad[1].empty()) {
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) g.in_grad[1][j] += g.out_grad[i * cols + j];
      }
    }
  });
}

Var channel_scale(Var x, Var s) {
  same_tape(x, s);
  const Tensor& X = x.value();
  const Tensor& S = s.value();
  if (X.rank() < 2 || S.rank() != 2 || S.dim(0) != X.dim(0) || S.dim(1) != X.dim(1)) {
    shape_mismatch("channel_scale", X.shape(), S.shape());
  }
  const std::size_t planes = X.dim(0) * X.dim(1);
  const std::size_t plane = X.size() / planes;
  Tensor out(X.shape());
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t j = 0; j < plane; ++j) out[p * plane + j] = X[p * plane + j] * S[p];
  }
  return x.tape->record(std::move(out), {x.id, s.id}, [planes, plane](GradContext& g) {
    const Tensor& X = *g.in[0];
    const Tensor& S = *g.in[1];
    for (std::size_t p = 0; p < planes; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < plane; ++j) {
        const double go = g.out_grad[p * plane + j];
        if (!g.in_grad[0].empty()) g.in_grad[0][p * plane + j] += go * S[p];
        acc += go * X[p * plane + j];
      }
      if (!g.in_grad[1].empty()) g.in_grad[1][p] += acc;
    }
  });
}

Var hyper_scale(Var nu, Var c, std::span<const double> omega) {
  same_tape(nu, c);
  const Tensor& N = nu.value();
  const Tensor& C = c.value();
  if (N.rank() != 1 || N.shape() != C.shape()) shape_mismatch("hyper_scale", N.shape(), C.shape());
  if (omega.empty()) throw ContractError("hyper_scale needs at least one conditioning value");
  const std::size_t batch = omega.size(), width = N.size();
  std::vector<double> w(omega.begin(), omega.end());
  Tensor out(Shape{batch, width});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < width; ++j) out[b * width + j] = w[b] * N[j] + C[j];
  }
  return nu.tape->record(std::move(out), {nu.id, c.id},
                         [w = std::move(w), width](GradContext& g) {
                           for (std::size_t b = 0; b < w.size(); ++b) {
                             for (std::size_t j = 0; j < width; ++j) {
                               const double go = g.out_grad[b * width + j];
                               if (!g.in_grad[0].empty()) g.in_grad[0][j] += w[b] * go;
                               if (!g.in_grad[1].empty()) g.in_grad[1][j] += go;
                             }
                           }
                         });
}

Var conv2d(Var x, Var kernels, Var bias, std::size_t stride, std::size_t padding) {
  same_tape(x, kernels);
  same_tape(x, bias);
  const Tensor& X = x.value();
  const Tensor& W = kernels.value();
  const Tensor& B = bias.value();
  if (X.rank() != 4 || W.rank() != 4 || W.dim(1) != X.dim(1) || W.dim(2) != W.dim(3)) {
    shape_mismatch("conv2d", X.shape(), W.shape());
  }
  if (B.rank() != 1 || B.dim(0) != W.dim(0)) shape_mismatch("conv2d bias", W.shape(), B.shape());
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");

  kernels::ConvGeometry geo;
  geo.batch = X.dim(0);
  geo.in_ch = X.dim(1);
  geo.in_h = X.dim(2);
  geo.in_w = X.dim(3);
  geo.out_ch = W.dim(0);
  geo.kernel = W.dim(2);
  geo.stride = stride;
  geo.pad = padding;
  for (std::size_t extent : {geo.in_h, geo.in_w}) {
    const std::size_t padded = extent + 2 * padding;
    if (padded < geo.kernel || (padded - geo.kernel) % stride != 0) {
      throw ConfigError(fmt::format(
          "conv2d: input extent {} with padding {}, kernel {}, stride {} gives a "
          "non-integral output size",
          extent, padding, geo.kernel, stride));
    }
  }

  Tensor out(Shape{geo.batch, geo.out_ch, geo.out_h(), geo.out_w()});
  kernels::conv2d_forward(geo, X.data(), W.data(), B.data(), out.data());
  return x.tape->record(std::move(out), {x.id, kernels.id, bias.id}, [geo](GradContext& g) {
    if (!g.in_grad[0].empty()) {
      kernels::conv2d_grad_input(geo, g.out_grad, g.in[1]->data(), g.in_grad[0]);
    }
    if (!g.in_grad[1].empty() || !g.in_grad[2].empty()) {
      std::vector<double> scratch;
      std::span<double> dw = g.in_grad[1];
      if (dw.empty()) {
        scratch.assign(geo.weight_size(), 0.0);
        dw = scratch;
      }
      kernels::conv2d_grad_params(geo, g.in[0]->data(), g.out_grad, dw, g.in_grad[2]);
    }
  });
}

Var upsample_zeros(Var x, std::size_t factor) {
  const Tensor& X = x.value();
  if (X.rank() != 4) {
    throw DimensionError(fmt::format("upsample_zeros needs NCHW input, got {}", shape_str(X.shape())));
  }
  if (factor == 0) throw ConfigError("upsample factor must be positive");
  const std::size_t planes = X.dim(0) * X.dim(1), h = X.dim(2), w = X.dim(3);
  const std::size_t H = h * factor, W = w * factor;
  Tensor out(Shape{X.dim(0), X.dim(1), H, W});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        out[(p * H + i * factor) * W + j * factor] = X[(p * h + i) * w + j];
      }
    }
  }
  return x.tape->record(std::move(out), {x.id}, [planes, h, w, factor, H, W](GradContext& g) {
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          g.in_grad[0][(p * h + i) * w + j] += g.out_grad[(p * H + i * factor) * W + j * factor];
        }
      }
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record(std::move(out), {x.id}, [](GradContext& g) {
    for (std::size_t i = 0; i < g.out_grad.size(); ++i) g.in_grad[0][i] += g.out_grad[i];
  });
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "none" || name == "linear") return ActivationKind::kNone;
  if (name == "relu") return ActivationKind::kRelu;
  if (name == "tanh") return ActivationKind::kTanh;
  if (name == "sigmoid") return ActivationKind::kSigmoid;
  if (name == "softmax") return ActivationKind::kSoftmax;
  throw ConfigError(fmt::format("unknown activation '{}'", name));
}

std::string_view activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kNone: return "none";
    case ActivationKind::kRelu: return "relu";
    case ActivationKind::kTanh: return "tanh";
    case ActivationKind::kSigmoid: return "sigmoid";
    case ActivationKind::kSoftmax: return "softmax";
  }
  return "none";
}

Var activation(ActivationKind kind, Var x) {
  const Tensor& X = x.value();
  const std::size_t n = X.size();
  Tensor out(X.shape());
  switch (kind) {
    case ActivationKind::kNone:
      return x;
    case ActivationKind::kRelu:
      for (std::size_t i = 0; i < n; ++i) out[i] = X[i] > 0.0 ? X[i] : 0.0;
      return x.tape->record(std::move(out), {x.id}, [n](GradContext& g) {
        const Tensor& X = *g.in[0];
        for (std::size_t i = 0; i < n; ++i) {
          if (X[i] > 0.0) g.in_grad[0][i] += g.out_grad[i];
        }
      });
    case ActivationKind::kTanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(X[i]);
      return x.tape->record(std::move(out), {x.id}, [n](GradContext& g) {
        for (std::size_t i = 0; i < n; ++i) {
          const double y = g.out[i];
          g.in_grad[0][i] += g.out_grad[i] * (1.0 - y * y);
        }
      });
    case ActivationKind::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        // Branches keep exp() from overflowing for large |x|.
        out[i] = X[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-X[i]))
                             : std::exp(X[i]) / (1.0 + std::exp(X[i]));
      }
      return x.tape->record(std::move(out), {x.id}, [n](GradContext& g) {
        for (std::size_t i = 0; i < n; ++i) {
          const double y = g.out[i];
          g.in_grad[0][i] += g.out_grad[i] * y * (1.0 - y);
        }
      });
    case ActivationKind::kSoftmax: {
      const std::size_t cols = X.shape().back();
      const std::size_t rows = n / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* in = X.data().data() + r * cols;
        double* o = out.data().data() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          o[j] = std::exp(in[j] - mx);
          z += o[j];
        }
        for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
      }
      return x.tape->record(std::move(out), {x.id}, [rows, cols](GradContext& g) {
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += g.out_grad[r * cols + j] * g.out[r * cols + j];
          for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t i = r * cols + j;
            g.in_grad[0][i] += g.out[i] * (g.out_grad[i] - dot);
          }
        }
      });
    }
  }
  return x;
}

Var sum(Var x) {
  const Tensor& X = x.value();
  double acc = 0.0;
  for (double v : X.data()) acc += v;
  return x.tape->record(Tensor::scalar(acc), {x.id}, [](GradContext& g) {
    for (double& v : g.in_grad[0]) v += g.out_grad[0];
  });
}

Var mean(Var x) {
  const double inv = 1.0 / double(x.size());
  return scale(sum(x), inv);
}

}  // namespace hajscc::ops
