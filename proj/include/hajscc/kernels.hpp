#pragma once

#include <cstddef>
#include <span>

// Raw numeric kernels behind the autodiff ops.
//
// Two implementations are kept side by side. `serial` is the plain
// loop-nest reference; `omp` distributes the outer loop with OpenMP and
// hoists bounds checks out of the inner loops. Every output element is owned
// by exactly one thread and accumulated in the same order as the reference,
// so both produce bit-identical results for any thread count. The unqualified
// entry points dispatch to `omp`.
//
// Backward kernels accumulate (+=) into their gradient outputs.

namespace hajscc::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_ch = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_ch = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t input_size() const { return batch * in_ch * in_h * in_w; }
  std::size_t output_size() const { return batch * out_ch * out_h() * out_w(); }
  std::size_t weight_size() const { return out_ch * in_ch * kernel * kernel; }
};

#define HAJSCC_KERNEL_SET                                                    \
  void matmul(std::size_t m, std::size_t k, std::size_t n,                   \
              std::span<const double> a, std::span<const double> b,          \
              std::span<double> c);                                          \
  /* da[m,k] += dc[m,n] * b[k,n]^T */                                        \
  void matmul_grad_a(std::size_t m, std::size_t k, std::size_t n,            \
                     std::span<const double> dc, std::span<const double> b,  \
                     std::span<double> da);                                  \
  /* db[k,n] += a[m,k]^T * dc[m,n] */                                        \
  void matmul_grad_b(std::size_t m, std::size_t k, std::size_t n,            \
                     std::span<const double> a, std::span<const double> dc,  \
                     std::span<double> db);                                  \
  void conv2d_forward(const ConvGeometry& g, std::span<const double> x,      \
                      std::span<const double> w, std::span<const double> b,  \
                      std::span<double> y);                                  \
  void conv2d_grad_input(const ConvGeometry& g, std::span<const double> dy,  \
                         std::span<const double> w, std::span<double> dx);   \
  void conv2d_grad_params(const ConvGeometry& g, std::span<const double> x,  \
                          std::span<const double> dy, std::span<double> dw,  \
                          std::span<double> db);

namespace serial {
HAJSCC_KERNEL_SET
}  // namespace serial

namespace omp {
HAJSCC_KERNEL_SET
}  // namespace omp

HAJSCC_KERNEL_SET

#undef HAJSCC_KERNEL_SET

}  // namespace hajscc::kernels
