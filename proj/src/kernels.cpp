#include "hajscc/kernels.hpp"

#include <algorithm>

namespace hajscc::kernels {

namespace serial {

void matmul(std::size_t m, std::size_t k, std::size_t n,
            std::span<const double> a, std::span<const double> b,
            std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_grad_a(std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> dc, std::span<const double> b,
                   std::span<double> da) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * b[p * n + j];
      da[i * k + p] += acc;
    }
  }
}

void matmul_grad_b(std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> a, std::span<const double> dc,
                   std::span<double> db) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * dc[i * n + j];
      db[p * n + j] += acc;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), K = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                const long iy = long(oy * g.stride + ky) - long(g.pad);
                const long ix = long(ox * g.stride + kx) - long(g.pad);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                acc += w[((co * g.in_ch + ci) * K + ky) * K + kx] *
                       x[((n * g.in_ch + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
          y[((n * g.out_ch + co) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

void conv2d_grad_input(const ConvGeometry& g, std::span<const double> dy,
                       std::span<const double> w, std::span<double> dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), K = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double gy = dy[((n * g.out_ch + co) * oh + oy) * ow + ox];
          for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                const long iy = long(oy * g.stride + ky) - long(g.pad);
                const long ix = long(ox * g.stride + kx) - long(g.pad);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                dx[((n * g.in_ch + ci) * g.in_h + iy) * g.in_w + ix] +=
                    gy * w[((co * g.in_ch + ci) * K + ky) * K + kx];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_grad_params(const ConvGeometry& g, std::span<const double> x,
                        std::span<const double> dy, std::span<double> dw,
                        std::span<double> db) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), K = g.kernel;
  for (std::size_t co = 0; co < g.out_ch; ++co) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double gy = dy[((n * g.out_ch + co) * oh + oy) * ow + ox];
          if (!db.empty()) db[co] += gy;
          for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
            for (std::size_t ky = 0; ky < K; ++ky) {
              for (std::size_t kx = 0; kx < K; ++kx) {
                const long iy = long(oy * g.stride + ky) - long(g.pad);
                const long ix = long(ox * g.stride + kx) - long(g.pad);
                if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
                dw[((co * g.in_ch + ci) * K + ky) * K + kx] +=
                    gy * x[((n * g.in_ch + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace serial

namespace omp {

namespace {

// Kernel taps [lo, hi) that land inside the unpadded input for output
// coordinate `o` along one axis.
struct TapRange {
  std::size_t lo;
  std::size_t hi;
};

inline TapRange tap_range(std::size_t o, std::size_t stride, std::size_t pad,
                          std::size_t kernel, std::size_t extent) {
  const long base = long(o * stride) - long(pad);
  const long lo = std::max(0L, -base);
  const long hi = std::min(long(kernel), long(extent) - base);
  if (hi <= lo) return {0, 0};
  return {std::size_t(lo), std::size_t(hi)};
}

// Tiny layers dominate the workload; spawning a team for them costs more
// than it saves.
constexpr std::size_t kParallelThreshold = 1 << 14;

}  // namespace

void matmul(std::size_t m, std::size_t k, std::size_t n,
            std::span<const double> a, std::span<const double> b,
            std::span<double> c) {
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (std::size_t i = 0; i < m; ++i) {
    double* row = C + i * n;
    std::fill(row, row + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

void matmul_grad_a(std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> dc, std::span<const double> b,
                   std::span<double> da) {
  const double* DC = dc.data();
  const double* B = b.data();
  double* DA = da.data();
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = DC + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = B + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      DA[i * k + p] += acc;
    }
  }
}

void matmul_grad_b(std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> a, std::span<const double> dc,
                   std::span<double> db) {
  const double* A = a.data();
  const double* DC = dc.data();
  double* DB = db.data();
#pragma omp parallel for schedule(static) if (m * k * n > kParallelThreshold)
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += A[i * k + p] * DC[i * n + j];
      DB[p * n + j] += acc;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), K = g.kernel;
  const std::size_t work = g.output_size() * g.in_ch * K * K;
  const double* X = x.data();
  const double* W = w.data();
  double* Y = y.data();
#pragma omp parallel for collapse(2) schedule(static) if (work > kParallelThreshold)
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      const double* wco = W + co * g.in_ch * K * K;
      double* yplane = Y + (n * g.out_ch + co) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const TapRange ry = tap_range(oy, g.stride, g.pad, K, g.in_h);
        const long iy0 = long(oy * g.stride) - long(g.pad);
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const TapRange rx = tap_range(ox, g.stride, g.pad, K, g.in_w);
          const long ix0 = long(ox * g.stride) - long(g.pad);
          double acc = b[co];
          for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
            const double* xplane = X + (n * g.in_ch + ci) * g.in_h * g.in_w;
            const double* wk = wco + ci * K * K;
            for (std::size_t ky = ry.lo; ky < ry.hi; ++ky) {
              const long row = (iy0 + long(ky)) * long(g.in_w) + ix0;
              const double* wrow = wk + ky * K;
              for (std::size_t kx = rx.lo; kx < rx.hi; ++kx) acc += wrow[kx] * xplane[row + long(kx)];
            }
          }
          yplane[oy * ow + ox] = acc;
        }
      }
    }
  }
}

void conv2d_grad_input(const ConvGeometry& g, std::span<const double> dy,
                       std::span<const double> w, std::span<double> dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), K = g.kernel;
  const std::size_t work = g.output_size() * g.in_ch * K * K;
  const double* DY = dy.data();
  const double* W = w.data();
  double* DX = dx.data();
  // Each sample's input gradient is owned by one thread.
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      const double* dyplane = DY + (n * g.out_ch + co) * oh * ow;
      const double* wco = W + co * g.in_ch * K * K;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const TapRange ry = tap_range(oy, g.stride, g.pad, K, g.in_h);
        const long iy0 = long(oy * g.stride) - long(g.pad);
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const TapRange rx = tap_range(ox, g.stride, g.pad, K, g.in_w);
          const long ix0 = long(ox * g.stride) - long(g.pad);
          const double gy = dyplane[oy * ow + ox];
          for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
            double* dxplane = DX + (n * g.in_ch + ci) * g.in_h * g.in_w;
            const double* wk = wco + ci * K * K;
            for (std::size_t ky = ry.lo; ky < ry.hi; ++ky) {
              const long row = (iy0 + long(ky)) * long(g.in_w) + ix0;
              const double* wrow = wk + ky * K;
              for (std::size_t kx = rx.lo; kx < rx.hi; ++kx) dxplane[row + long(kx)] += gy * wrow[kx];
            }
          }
        }
      }
    }
  }
}

void conv2d_grad_params(const ConvGeometry& g, std::span<const double> x,
                        std::span<const double> dy, std::span<double> dw,
                        std::span<double> db) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), K = g.kernel;
  const std::size_t work = g.output_size() * g.in_ch * K * K;
  const double* X = x.data();
  const double* DY = dy.data();
  double* DW = dw.data();
  double* DB = db.empty() ? nullptr : db.data();
  // Each output channel's kernel gradient is owned by one thread.
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::size_t co = 0; co < g.out_ch; ++co) {
    double* dwco = DW + co * g.in_ch * K * K;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const double* dyplane = DY + (n * g.out_ch + co) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const TapRange ry = tap_range(oy, g.stride, g.pad, K, g.in_h);
        const long iy0 = long(oy * g.stride) - long(g.pad);
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const TapRange rx = tap_range(ox, g.stride, g.pad, K, g.in_w);
          const long ix0 = long(ox * g.stride) - long(g.pad);
          const double gy = dyplane[oy * ow + ox];
          if (DB) DB[co] += gy;
          for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
            const double* xplane = X + (n * g.in_ch + ci) * g.in_h * g.in_w;
            double* dwk = dwco + ci * K * K;
            for (std::size_t ky = ry.lo; ky < ry.hi; ++ky) {
              const long row = (iy0 + long(ky)) * long(g.in_w) + ix0;
              double* dwrow = dwk + ky * K;
              for (std::size_t kx = rx.lo; kx < rx.hi; ++kx) dwrow[kx] += gy * xplane[row + long(kx)];
            }
          }
        }
      }
    }
  }
}

}  // namespace omp

void matmul(std::size_t m, std::size_t k, std::size_t n,
            std::span<const double> a, std::span<const double> b,
            std::span<double> c) {
  omp::matmul(m, k, n, a, b, c);
}

void matmul_grad_a(std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> dc, std::span<const double> b,
                   std::span<double> da) {
  omp::matmul_grad_a(m, k, n, dc, b, da);
}

void matmul_grad_b(std::size_t m, std::size_t k, std::size_t n,
                   std::span<const double> a, std::span<const double> dc,
                   std::span<double> db) {
  omp::matmul_grad_b(m, k, n, a, dc, db);
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> y) {
  omp::conv2d_forward(g, x, w, b, y);
}

void conv2d_grad_input(const ConvGeometry& g, std::span<const double> dy,
                       std::span<const double> w, std::span<double> dx) {
  omp::conv2d_grad_input(g, dy, w, dx);
}

void conv2d_grad_params(const ConvGeometry& g, std::span<const double> x,
                        std::span<const double> dy, std::span<double> dw,
                        std::span<double> db) {
  omp::conv2d_grad_params(g, x, dy, dw, db);
}

}  // namespace hajscc::kernels
