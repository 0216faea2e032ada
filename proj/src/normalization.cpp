#include "rfcl/normalization.hpp"

#include <algorithm>
#include <cmath>

namespace rfcl {
namespace {

struct View {
  std::size_t batch, channels, spatial;
};

View view_of(const Tensor& x, std::size_t channels) {
  if (x.rows() == 0) throw DimensionError("normalization needs at least one pattern");
  if (channels == 0 || x.row_size() % channels != 0) {
    throw DimensionError("normalization: row size " + std::to_string(x.row_size()) +
                         " not divisible by " + std::to_string(channels) + " channels");
  }
  return {x.rows(), channels, x.row_size() / channels};
}

void check_affine(std::size_t channels, std::span<const real> scale, std::span<const real> shift) {
  if (scale.size() != channels || shift.size() != channels) {
    throw DimensionError("normalization scale/shift size does not match channel count");
  }
}

NormOutput normalize_train(const Tensor& x, std::size_t channels,
                           std::vector<real> r, std::vector<real> d, BatchMoments moments,
                           std::span<const real> scale, std::span<const real> shift) {
  const View v = view_of(x, channels);
  NormOutput out{Tensor(x.shape()), {}};
  NormCache& c = out.cache;
  c.batch = v.batch;
  c.channels = v.channels;
  c.spatial = v.spatial;
  c.z.resize(x.size());
  for (std::size_t n = 0; n < v.batch; ++n) {
    for (std::size_t ch = 0; ch < v.channels; ++ch) {
      const std::size_t base = (n * v.channels + ch) * v.spatial;
      const real m = moments.mean[ch];
      const real s = moments.stddev[ch];
      for (std::size_t p = 0; p < v.spatial; ++p) {
        const real z = (x[base + p] - m) / s;
        c.z[base + p] = z;
        out.y[base + p] = scale[ch] * (z * r[ch] + d[ch]) + shift[ch];
      }
    }
  }
  c.moments = std::move(moments);
  c.r = std::move(r);
  c.d = std::move(d);
  return out;
}

}  // namespace

BrnLayerState::BrnLayerState(std::size_t channels) : mu(channels, 0.0), sigma(channels, 1.0) {}

ClipFactors clip_factors(real ratio, real offset, real r_max, real d_max) {
  if (r_max < 1.0 || d_max < 0.0) {
    throw ConfigError("renormalization bounds need r_max >= 1 and d_max >= 0");
  }
  ClipFactors f;
  f.r = std::clamp(ratio, 1.0 / r_max, r_max);
  f.d = std::clamp(offset, -d_max, d_max);
  return f;
}

BatchMoments batch_moments(const Tensor& x, std::size_t channels, real epsilon) {
  const View v = view_of(x, channels);
  BatchMoments m;
  m.mean.assign(v.channels, 0.0);
  m.stddev.assign(v.channels, 0.0);
  const real count = static_cast<real>(v.batch * v.spatial);
  for (std::size_t ch = 0; ch < v.channels; ++ch) {
    real sum = 0.0;
    for (std::size_t n = 0; n < v.batch; ++n) {
      const std::size_t base = (n * v.channels + ch) * v.spatial;
      for (std::size_t p = 0; p < v.spatial; ++p) sum += x[base + p];
    }
    const real mean = sum / count;
    real ss = 0.0;
    for (std::size_t n = 0; n < v.batch; ++n) {
      const std::size_t base = (n * v.channels + ch) * v.spatial;
      for (std::size_t p = 0; p < v.spatial; ++p) {
        const real dev = x[base + p] - mean;
        ss += dev * dev;
      }
    }
    m.mean[ch] = mean;
    m.stddev[ch] = std::sqrt(ss / count + epsilon);
  }
  return m;
}

NormOutput bn_forward_train(const Tensor& x, const BrnLayerState& state,
                            std::span<const real> scale, std::span<const real> shift) {
  const std::size_t channels = state.channels();
  check_affine(channels, scale, shift);
  BatchMoments m = batch_moments(x, channels, state.epsilon);
  return normalize_train(x, channels, std::vector<real>(channels, 1.0),
                         std::vector<real>(channels, 0.0), std::move(m), scale, shift);
}

NormOutput brn_forward_train(const Tensor& x, const BrnLayerState& state,
                             std::span<const real> scale, std::span<const real> shift) {
  const std::size_t channels = state.channels();
  check_affine(channels, scale, shift);
  BatchMoments m = batch_moments(x, channels, state.epsilon);
  std::vector<real> r(channels, 1.0), d(channels, 0.0);
  const bool pure_bn = state.r_max == 1.0 && state.d_max == 0.0;
  if (!pure_bn) {
    if (!state.initialized) {
      throw ConfigError(
          "batch renormalization with r_max > 1 or d_max > 0 before the moving moments were "
          "initialized (run a warm-up iteration first)");
    }
    for (std::size_t ch = 0; ch < channels; ++ch) {
      if (!(state.sigma[ch] > 0.0)) {
        throw ConfigError("batch renormalization: moving sigma is not positive on channel " +
                          std::to_string(ch));
      }
      const ClipFactors f = clip_factors(m.stddev[ch] / state.sigma[ch],
                                         (m.mean[ch] - state.mu[ch]) / state.sigma[ch],
                                         state.r_max, state.d_max);
      r[ch] = f.r;
      d[ch] = f.d;
    }
  }
  return normalize_train(x, channels, std::move(r), std::move(d), std::move(m),
                         scale, shift);
}

Tensor brn_forward_eval(const Tensor& x, const BrnLayerState& state, std::span<const real> scale,
                        std::span<const real> shift) {
  const std::size_t channels = state.channels();
  check_affine(channels, scale, shift);
  const View v = view_of(x, channels);
  Tensor y(x.shape());
  for (std::size_t n = 0; n < v.batch; ++n) {
    for (std::size_t ch = 0; ch < v.channels; ++ch) {
      const std::size_t base = (n * v.channels + ch) * v.spatial;
      for (std::size_t p = 0; p < v.spatial; ++p) {
        y[base + p] = scale[ch] * ((x[base + p] - state.mu[ch]) / state.sigma[ch]) + shift[ch];
      }
    }
  }
  return y;
}

void norm_backward(const NormCache& c, std::span<const real> scale, const Tensor& dy, Tensor& dx,
                   std::span<real> dscale, std::span<real> dshift) {
  if (dy.size() != c.z.size()) throw DimensionError("norm_backward: gradient shape mismatch");
  dx = Tensor(dy.shape());
  const real count = static_cast<real>(c.batch * c.spatial);
  for (std::size_t ch = 0; ch < c.channels; ++ch) {
    real sum_dy = 0.0, sum_dy_xhat = 0.0, sum_dz = 0.0, sum_dz_z = 0.0;
    for (std::size_t n = 0; n < c.batch; ++n) {
      const std::size_t base = (n * c.channels + ch) * c.spatial;
      for (std::size_t p = 0; p < c.spatial; ++p) {
        const real g = dy[base + p];
        const real z = c.z[base + p];
        sum_dy += g;
        sum_dy_xhat += g * (z * c.r[ch] + c.d[ch]);
        const real dz = g * scale[ch] * c.r[ch];
        sum_dz += dz;
        sum_dz_z += dz * z;
      }
    }
    dscale[ch] = sum_dy_xhat;
    dshift[ch] = sum_dy;
    const real mean_dz = sum_dz / count;
    const real mean_dz_z = sum_dz_z / count;
    const real inv_s = 1.0 / c.moments.stddev[ch];
    for (std::size_t n = 0; n < c.batch; ++n) {
      const std::size_t base = (n * c.channels + ch) * c.spatial;
      for (std::size_t p = 0; p < c.spatial; ++p) {
        const real dz = dy[base + p] * scale[ch] * c.r[ch];
        dx[base + p] = inv_s * (dz - mean_dz - c.z[base + p] * mean_dz_z);
      }
    }
  }
}

void update_moving_moments(BrnLayerState& state, const BatchMoments& mb) {
  if (mb.mean.size() != state.channels() || mb.stddev.size() != state.channels()) {
    throw DimensionError("moving-moment update: channel count mismatch");
  }
  if (!state.initialized) {
    state.mu = mb.mean;
    state.sigma = mb.stddev;
    state.initialized = true;
    return;
  }
  const real a = state.alpha_past;
  for (std::size_t ch = 0; ch < state.channels(); ++ch) {
    state.mu[ch] = a * state.mu[ch] + (1.0 - a) * mb.mean[ch];
    state.sigma[ch] = a * state.sigma[ch] + (1.0 - a) * mb.stddev[ch];
  }
}

BrnSchedule BrnSchedule::for_protocol(std::string_view tag) {
  BrnSchedule s;
  if (tag == "nicv2-79" || tag == "nicv2-196" || tag == "ni" || tag == "nc") {
    s.r_max = 1.25;
    s.d_max = 0.5;
  } else if (tag == "nicv2-391") {
    s.r_max = 1.5;
    s.d_max = 2.5;
  } else {
    throw ConfigError("unknown protocol tag '" + std::string(tag) + "'");
  }
  return s;
}

BrnParams schedule_params(const BrnSchedule& s, int batch_index, int iteration,
                          int batch1_iterations) {
  if (batch_index < 1) throw ConfigError("batch_index is 1-based");
  if (batch_index > 1) return {s.r_max, s.d_max, s.alpha_past};
  if (iteration < s.warmup_iterations) return {1.0, 0.0, s.first_alpha_past};
  int ramp = s.ramp_iterations > 0 ? s.ramp_iterations : batch1_iterations - s.warmup_iterations;
  ramp = std::max(ramp, 1);
  const real t = std::min<real>(1.0, static_cast<real>(iteration - s.warmup_iterations + 1) /
                                         static_cast<real>(ramp));
  return {1.0 + t * (s.ramp_r_max - 1.0), t * s.ramp_d_max, s.first_alpha_past};
}

BrnParams schedule_params(int batch_index, int iteration, std::string_view protocol,
                          int batch1_iterations) {
  return schedule_params(BrnSchedule::for_protocol(protocol), batch_index, iteration,
                         batch1_iterations);
}

}  // namespace rfcl
