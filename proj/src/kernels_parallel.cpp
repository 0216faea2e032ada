// OpenMP kernels. Work is split over independent output elements only; the
// inner accumulation order matches the reference loops exactly.

#include <cstdint>

#include "rfcl/kernels.hpp"

namespace rfcl::kernels::parallel {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kMinParallelWork = 1u << 14;

using idx = std::int64_t;

}  // namespace

void dense_forward(const DenseDims& d, std::span<const real> x, std::span<const real> w,
                   std::span<const real> b, std::span<real> y) {
  const idx N = static_cast<idx>(d.batch), O = static_cast<idx>(d.out);
  const std::size_t in = d.in;
  const real* xp = x.data();
  const real* wp = w.data();
  const real* bp = b.data();
  real* yp = y.data();
#pragma omp parallel for collapse(2) schedule(static) if (d.batch * d.out * d.in >= kMinParallelWork)
  for (idx n = 0; n < N; ++n) {
    for (idx o = 0; o < O; ++o) {
      const real* wo = wp + o * in;
      const real* xn = xp + n * in;
      real acc = bp[o];
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xn[i];
      yp[n * O + o] = acc;
    }
  }
}

void dense_backward_input(const DenseDims& d, std::span<const real> w, std::span<const real> dy,
                          std::span<real> dx) {
  const idx N = static_cast<idx>(d.batch), I = static_cast<idx>(d.in);
  const std::size_t out = d.out, in = d.in;
  const real* wp = w.data();
  const real* dyp = dy.data();
  real* dxp = dx.data();
#pragma omp parallel for collapse(2) schedule(static) if (d.batch * d.out * d.in >= kMinParallelWork)
  for (idx n = 0; n < N; ++n) {
    for (idx i = 0; i < I; ++i) {
      const real* dyn = dyp + n * static_cast<idx>(out);
      real acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += dyn[o] * wp[o * in + static_cast<std::size_t>(i)];
      dxp[n * I + i] = acc;
    }
  }
}

void dense_backward_params(const DenseDims& d, std::span<const real> x, std::span<const real> dy,
                           std::span<real> dw, std::span<real> db) {
  const idx O = static_cast<idx>(d.out);
  const std::size_t batch = d.batch, in = d.in, out = d.out;
  const real* xp = x.data();
  const real* dyp = dy.data();
#pragma omp parallel for schedule(static) if (d.batch * d.out * d.in >= kMinParallelWork)
  for (idx o = 0; o < O; ++o) {
    const auto uo = static_cast<std::size_t>(o);
    real bacc = 0.0;
    for (std::size_t n = 0; n < batch; ++n) bacc += dyp[n * out + uo];
    db[uo] = bacc;
    for (std::size_t i = 0; i < in; ++i) {
      real acc = 0.0;
      for (std::size_t n = 0; n < batch; ++n) acc += dyp[n * out + uo] * xp[n * in + i];
      dw[uo * in + i] = acc;
    }
  }
}

void depthwise_forward(const DepthwiseDims& d, std::span<const real> x, std::span<const real> w,
                       std::span<const real> b, std::span<real> y) {
  const idx planes = static_cast<idx>(d.batch * d.channels);
  const auto pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.height);
  const auto W = static_cast<std::ptrdiff_t>(d.width);
  const auto K = static_cast<std::ptrdiff_t>(d.kernel);
  const std::size_t plane = d.height * d.width;
#pragma omp parallel for schedule(static) \
    if (d.batch * d.channels * plane * d.kernel * d.kernel >= kMinParallelWork)
  for (idx nc = 0; nc < planes; ++nc) {
    const std::size_t c = static_cast<std::size_t>(nc) % d.channels;
    const real* xc = x.data() + static_cast<std::size_t>(nc) * plane;
    const real* wc = w.data() + c * d.kernel * d.kernel;
    real* yc = y.data() + static_cast<std::size_t>(nc) * plane;
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

void depthwise_backward_input(const DepthwiseDims& d, std::span<const real> w,
                              std::span<const real> dy, std::span<real> dx) {
  const idx planes = static_cast<idx>(d.batch * d.channels);
  const auto pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.height);
  const auto W = static_cast<std::ptrdiff_t>(d.width);
  const auto K = static_cast<std::ptrdiff_t>(d.kernel);
  const std::size_t plane = d.height * d.width;
#pragma omp parallel for schedule(static) \
    if (d.batch * d.channels * plane * d.kernel * d.kernel >= kMinParallelWork)
  for (idx nc = 0; nc < planes; ++nc) {
    const std::size_t c = static_cast<std::size_t>(nc) % d.channels;
    const real* dyc = dy.data() + static_cast<std::size_t>(nc) * plane;
    const real* wc = w.data() + c * d.kernel * d.kernel;
    real* dxc = dx.data() + static_cast<std::size_t>(nc) * plane;
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

void depthwise_backward_params(const DepthwiseDims& d, std::span<const real> x,
                               std::span<const real> dy, std::span<real> dw,
                               std::span<real> db) {
  const idx C = static_cast<idx>(d.channels);
  const auto pad = static_cast<std::ptrdiff_t>(d.kernel / 2);
  const auto H = static_cast<std::ptrdiff_t>(d.height);
  const auto W = static_cast<std::ptrdiff_t>(d.width);
  const auto K = static_cast<std::ptrdiff_t>(d.kernel);
  const std::size_t plane = d.height * d.width;
#pragma omp parallel for schedule(static) \
    if (d.batch * d.channels * plane * d.kernel * d.kernel >= kMinParallelWork)
  for (idx ci = 0; ci < C; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
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
  const idx N = static_cast<idx>(d.batch), O = static_cast<idx>(d.out_channels);
  const std::size_t cin = d.in_channels, sp = d.spatial;
#pragma omp parallel for collapse(2) schedule(static) \
    if (d.batch * d.out_channels * d.in_channels * d.spatial >= kMinParallelWork)
  for (idx n = 0; n < N; ++n) {
    for (idx o = 0; o < O; ++o) {
      const real* xn = x.data() + static_cast<std::size_t>(n) * cin * sp;
      const real* wo = w.data() + static_cast<std::size_t>(o) * cin;
      real* yo = y.data() + (static_cast<std::size_t>(n * O + o)) * sp;
      for (std::size_t p = 0; p < sp; ++p) {
        real acc = b[static_cast<std::size_t>(o)];
        for (std::size_t c = 0; c < cin; ++c) acc += wo[c] * xn[c * sp + p];
        yo[p] = acc;
      }
    }
  }
}

void pointwise_backward_input(const PointwiseDims& d, std::span<const real> w,
                              std::span<const real> dy, std::span<real> dx) {
  const idx N = static_cast<idx>(d.batch), C = static_cast<idx>(d.in_channels);
  const std::size_t cin = d.in_channels, cout = d.out_channels, sp = d.spatial;
#pragma omp parallel for collapse(2) schedule(static) \
    if (d.batch * d.out_channels * d.in_channels * d.spatial >= kMinParallelWork)
  for (idx n = 0; n < N; ++n) {
    for (idx ci = 0; ci < C; ++ci) {
      const auto c = static_cast<std::size_t>(ci);
      const real* dyn = dy.data() + static_cast<std::size_t>(n) * cout * sp;
      real* dxc = dx.data() + (static_cast<std::size_t>(n) * cin + c) * sp;
      for (std::size_t p = 0; p < sp; ++p) {
        real acc = 0.0;
        for (std::size_t o = 0; o < cout; ++o) acc += w[o * cin + c] * dyn[o * sp + p];
        dxc[p] = acc;
      }
    }
  }
}

void pointwise_backward_params(const PointwiseDims& d, std::span<const real> x,
                               std::span<const real> dy, std::span<real> dw,
                               std::span<real> db) {
  const idx O = static_cast<idx>(d.out_channels);
  const std::size_t cin = d.in_channels, cout = d.out_channels, sp = d.spatial;
#pragma omp parallel for schedule(static) \
    if (d.batch * d.out_channels * d.in_channels * d.spatial >= kMinParallelWork)
  for (idx oi = 0; oi < O; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    real bacc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const real* dyo = dy.data() + (n * cout + o) * sp;
      for (std::size_t p = 0; p < sp; ++p) bacc += dyo[p];
    }
    db[o] = bacc;
    for (std::size_t c = 0; c < cin; ++c) {
      real acc = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) {
        const real* dyo = dy.data() + (n * cout + o) * sp;
        const real* xc = x.data() + (n * cin + c) * sp;
        for (std::size_t p = 0; p < sp; ++p) acc += dyo[p] * xc[p];
      }
      dw[o * cin + c] = acc;
    }
  }
}

}  // namespace rfcl::kernels::parallel
