#pragma once

// Compute kernels for the layer types of the network.
//
// Two implementations share every signature: `reference` is a plain serial
// loop nest, `parallel` distributes independent outputs over OpenMP threads.
// Each output element is accumulated in the same order by both, so their
// results are bit-identical; tests rely on that.

#include <span>

#include "rfcl/common.hpp"

namespace rfcl::kernels {

// y[n, o] = b[o] + sum_i w[o, i] * x[n, i]
struct DenseDims {
  std::size_t batch;
  std::size_t in;
  std::size_t out;
};

// Per-channel k x k filter, stride 1, zero "same" padding (k odd).
// Layout [batch, channels, height, width].
struct DepthwiseDims {
  std::size_t batch;
  std::size_t channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;
};

// 1x1 convolution mixing channels at every spatial position.
// Layout [batch, channels, spatial].
struct PointwiseDims {
  std::size_t batch;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t spatial;
};

#define RFCL_KERNEL_DECLS                                                                      \
  void dense_forward(const DenseDims& d, std::span<const real> x, std::span<const real> w,     \
                     std::span<const real> b, std::span<real> y);                              \
  void dense_backward_input(const DenseDims& d, std::span<const real> w,                       \
                            std::span<const real> dy, std::span<real> dx);                     \
  void dense_backward_params(const DenseDims& d, std::span<const real> x,                      \
                             std::span<const real> dy, std::span<real> dw, std::span<real> db); \
  void depthwise_forward(const DepthwiseDims& d, std::span<const real> x,                      \
                         std::span<const real> w, std::span<const real> b, std::span<real> y); \
  void depthwise_backward_input(const DepthwiseDims& d, std::span<const real> w,               \
                                std::span<const real> dy, std::span<real> dx);                 \
  void depthwise_backward_params(const DepthwiseDims& d, std::span<const real> x,              \
                                 std::span<const real> dy, std::span<real> dw,                 \
                                 std::span<real> db);                                          \
  void pointwise_forward(const PointwiseDims& d, std::span<const real> x,                      \
                         std::span<const real> w, std::span<const real> b, std::span<real> y); \
  void pointwise_backward_input(const PointwiseDims& d, std::span<const real> w,               \
                                std::span<const real> dy, std::span<real> dx);                 \
  void pointwise_backward_params(const PointwiseDims& d, std::span<const real> x,              \
                                 std::span<const real> dy, std::span<real> dw,                 \
                                 std::span<real> db);

namespace reference {
RFCL_KERNEL_DECLS
}  // namespace reference

namespace parallel {
RFCL_KERNEL_DECLS
}  // namespace parallel

#undef RFCL_KERNEL_DECLS

}  // namespace rfcl::kernels
