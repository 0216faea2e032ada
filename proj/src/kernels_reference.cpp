// Serial loop nests. Kept as the ground truth for the OpenMP kernels.

#include "rfcl/kernels.hpp"

namespace rfcl::kernels::reference {

void dense_forward(const DenseDims& d, std::span<const real> x, std::span<const real> w,
                   std::span<const real> b, std::span<real> y) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t o = 0; o < d.out; ++o) {
      real acc = b[o];
      for (std::size_t i = 0; i < d.in; ++i) acc += w[o * d.in + i] * x[n * d.in + i];
      y[n * d.out + o] = acc;
    }
  }
}

void dense_backward_input(const DenseDims& d, std::span<const real> w, std::span<const real> dy,
                          std::span<real> dx) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t i = 0; i < d.in; ++i) {
      real acc = 0.0;
      for (std::size_t o = 0; o < d.out; ++o) acc += dy[n * d.out + o] * w[o * d.in + i];
      dx[n * d.in + i] = acc;
    }
  }
}

void dense_backward_params(const DenseDims& d, std::span<const real> x, std::span<const real> dy,
                           std::span<real> dw, std::span<real> db) {
  for (std::size_t o = 0; o < d.out; ++o) {
    real bacc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) bacc += dy[n * d.out + o];
    db[o] = bacc;
    for (std::size_t i = 0; i < d.in; ++i) {
      real acc = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) acc += dy[n * d.out + o] * x[n * d.in + i];
      dw[o * d.in + i] = acc;
    }
  }
}

void depthwise_forward(const DepthwiseDims& d, std::span<const real> x, std::span<const real> w,
                       std::span<const real> b, std::span<real> y) {
  const auto pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.height);
  const auto W = static_cast<std::ptrdiff_t>(d.width);
  const auto K = static_cast<std::ptrdiff_t>(d.kernel);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const real* xc = x.data() + (n * d.channels + c) * d.height * d.width;
      const real* wc = w.data() + c * d.kernel * d.kernel;
      real* yc = y.data() + (n * d.channels + c) * d.height * d.width;
      for (std::ptrdiff_t i = 0; i < H; ++i) {
        for (std::ptrdiff_t j = 0; j < W; ++j) {
          real acc = b[c];
          for (std::ptrdiff_t u = 0; u < K; ++u) {
            const std::ptrdiff_t ii = i + u - pad;
            if (ii < 0 || ii >= H) continue;
            for (std::ptrdiff_t v = 0; v < K; ++v) {
              const std::ptrdiff_t jj = j + v - pad;
              if (jj < 0 || jj >= W) continue;
              acc += wc[u * K + v] * xc[ii * W + jj];
            }
          }
          yc[i * W + j] = acc;
        }
      }
    }
  }
}

void depthwise_backward_input(const DepthwiseDims& d, std::span<const real> w,
                              std::span<const real> dy, std::span<real> dx) {
  const auto pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.height);
  const auto W = static_cast<std::ptrdiff_t>(d.width);
  const auto K = static_cast<std::ptrdiff_t>(d.kernel);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const real* dyc = dy.data() + (n * d.channels + c) * d.height * d.width;
      const real* wc = w.data() + c * d.kernel * d.kernel;
      real* dxc = dx.data() + (n * d.channels + c) * d.height * d.width;
      // x[ii, jj] contributes to y[ii - u + pad, jj - v + pad] through w[u, v].
      for (std::ptrdiff_t ii = 0; ii < H; ++ii) {
        for (std::ptrdiff_t jj = 0; jj < W; ++jj) {
          real acc = 0.0;
          for (std::ptrdiff_t u = 0; u < K; ++u) {
            const std::ptrdiff_t i = ii - u + pad;
            if (i < 0 || i >= H) continue;
            for (std::ptrdiff_t v = 0; v < K; ++v) {
              const std::ptrdiff_t j = jj - v + pad;
              if (j < 0 || j >= W) continue;
              acc += wc[u * K + v] * dyc[i * W + j];
            }
          }
          dxc[ii * W + jj] = acc;
        }
      }
    }
  }
}

void depthwise_backward_params(const DepthwiseDims& d, std::span<const real> x,
                               std::span<const real> dy, std::span<real> dw,
                               std::span<real> db) {
  const auto pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.height);
  const auto W = static_cast<std::ptrdiff_t>(d.width);
  const auto K = static_cast<std::ptrdiff_t>(d.kernel);
  const std::size_t plane = d.height * d.width;
  for (std::size_t c = 0; c < d.channels; ++c) {
    real bacc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const real* dyc = dy.data() + (n * d.channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) bacc += dyc[p];
    }
    db[c] = bacc;
    for (std::ptrdiff_t u = 0; u < K; ++u) {
      for (std::ptrdiff_t v = 0; v < K; ++v) {
        real acc = 0.0;
        for (std::size_t n = 0; n < d.batch; ++n) {
          const real* xc = x.data() + (n * d.channels + c) * plane;
          const real* dyc = dy.data() + (n * d.channels + c) * plane;
          for (std::ptrdiff_t i = 0; i < H; ++i) {
            const std::ptrdiff_t ii = i + u - pad;
            if (ii < 0 || ii >= H) continue;
            for (std::ptrdiff_t j = 0; j < W; ++j) {
              const std::ptrdiff_t jj = j + v - pad;
              if (jj < 0 || jj >= W) continue;
              acc += dyc[i * W + j] * xc[ii * W + jj];
            }
          }
        }
        dw[c * d.kernel * d.kernel + static_cast<std::size_t>(u * K + v)] = acc;
      }
    }
  }
}

void pointwise_forward(const PointwiseDims& d, std::span<const real> x, std::span<const real> w,
                       std::span<const real> b, std::span<real> y) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    const real* xn = x.data() + n * d.in_channels * d.spatial;
    real* yn = y.data() + n * d.out_channels * d.spatial;
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      for (std::size_t p = 0; p < d.spatial; ++p) {
        real acc = b[o];
        for (std::size_t c = 0; c < d.in_channels; ++c) {
          acc += w[o * d.in_channels + c] * xn[c * d.spatial + p];
        }
        yn[o * d.spatial + p] = acc;
      }
    }
  }
}

void pointwise_backward_input(const PointwiseDims& d, std::span<const real> w,
                              std::span<const real> dy, std::span<real> dx) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    const real* dyn = dy.data() + n * d.out_channels * d.spatial;
    real* dxn = dx.data() + n * d.in_channels * d.spatial;
    for (std::size_t c = 0; c < d.in_channels; ++c) {
      for (std::size_t p = 0; p < d.spatial; ++p) {
        real acc = 0.0;
        for (std::size_t o = 0; o < d.out_channels; ++o) {
          acc += w[o * d.in_channels + c] * dyn[o * d.spatial + p];
        }
        dxn[c * d.spatial + p] = acc;
      }
    }
  }
}

void pointwise_backward_params(const PointwiseDims& d, std::span<const real> x,
                               std::span<const real> dy, std::span<real> dw,
                               std::span<real> db) {
  for (std::size_t o = 0; o < d.out_channels; ++o) {
    real bacc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const real* dyo = dy.data() + (n * d.out_channels + o) * d.spatial;
      for (std::size_t p = 0; p < d.spatial; ++p) bacc += dyo[p];
    }
    db[o] = bacc;
    for (std::size_t c = 0; c < d.in_channels; ++c) {
      real acc = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) {
        const real* dyo = dy.data() + (n * d.out_channels + o) * d.spatial;
        const real* xc = x.data() + (n * d.in_channels + c) * d.spatial;
        for (std::size_t p = 0; p < d.spatial; ++p) acc += dyo[p] * xc[p];
      }
      dw[o * d.in_channels + c] = acc;
    }
  }
}

}  // namespace rfcl::kernels::reference
