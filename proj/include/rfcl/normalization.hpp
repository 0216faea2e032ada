#pragma once

// Batch Normalization and Batch Renormalization.
//
// Tensors are viewed as [batch, channels, spatial]; moments are taken per
// channel over batch x spatial. The standard deviation of a mini-batch is
// sqrt(var + eps) everywhere (training, renormalization ratios and the
// tracked moving sigma), so BRN with r_max = 1, d_max = 0 is exactly BN.

#include <span>
#include <string_view>
#include <vector>

#include "rfcl/common.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

struct BrnLayerState {
  std::vector<real> mu;     // moving mean
  std::vector<real> sigma;  // moving standard deviation
  real epsilon = 1e-5;
  real r_max = 1.0;
  real d_max = 0.0;
  real alpha_past = 0.99;
  // False until the first moving-moment update; the first update copies the
  // mini-batch moments instead of blending them with the (0, 1) defaults.
  bool initialized = false;

  explicit BrnLayerState(std::size_t channels = 0);
  std::size_t channels() const { return mu.size(); }
};

struct BatchMoments {
  std::vector<real> mean;
  std::vector<real> stddev;  // sqrt(var + eps), biased variance
};

struct ClipFactors {
  real r = 1.0;
  real d = 0.0;
};

// r = clip(ratio, [1/r_max, r_max]), d = clip(offset, [-d_max, d_max]).
ClipFactors clip_factors(real ratio, real offset, real r_max, real d_max);

// Everything the backward pass needs from a training-mode forward.
struct NormCache {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t spatial = 0;
  std::vector<real> z;  // (x - mean_mb) / stddev_mb
  BatchMoments moments;
  std::vector<real> r;  // per channel, constant in the backward pass
  std::vector<real> d;
};

struct NormOutput {
  Tensor y;
  NormCache cache;
};

BatchMoments batch_moments(const Tensor& x, std::size_t channels, real epsilon);

// y = scale * (x - mean_mb) / stddev_mb + shift
NormOutput bn_forward_train(const Tensor& x, const BrnLayerState& state,
                            std::span<const real> scale, std::span<const real> shift);

// y = scale * ((x - mean_mb) / stddev_mb * r + d) + shift with r, d clipped
// against the moving moments. Throws ConfigError when r_max > 1 or d_max > 0
// and the moving moments were never initialized.
NormOutput brn_forward_train(const Tensor& x, const BrnLayerState& state,
                             std::span<const real> scale, std::span<const real> shift);

// Inference path: y = scale * (x - mu) / sigma + shift. Batch independent.
Tensor brn_forward_eval(const Tensor& x, const BrnLayerState& state,
                        std::span<const real> scale, std::span<const real> shift);

// Gradient through BN/BRN with r and d held constant.
void norm_backward(const NormCache& cache, std::span<const real> scale, const Tensor& dy,
                   Tensor& dx, std::span<real> dscale, std::span<real> dshift);

// mu <- a * mu + (1 - a) * mean_mb; sigma likewise.
void update_moving_moments(BrnLayerState& state, const BatchMoments& mb);

// Renormalization clipping and moving-average weight for one iteration.
struct BrnParams {
  real r_max = 1.0;
  real d_max = 0.0;
  real alpha_past = 0.99;
  bool operator==(const BrnParams&) const = default;
};

// Two-phase schedule. Batch 1: `warmup_iterations` with r_max = 1, d_max = 0,
// then a linear ramp to (ramp_r_max, ramp_d_max). Later batches: fixed
// (r_max, d_max) and a slower moving average.
struct BrnSchedule {
  int warmup_iterations = 48;
  // Ramp length in iterations; 0 means "the rest of batch 1".
  int ramp_iterations = 0;
  real ramp_r_max = 3.0;
  real ramp_d_max = 5.0;
  real first_alpha_past = 0.99;
  real r_max = 1.25;
  real d_max = 0.5;
  real alpha_past = 0.9999;

  // Targets per protocol tag: nicv2-79, nicv2-196, nicv2-391, ni, nc.
  static BrnSchedule for_protocol(std::string_view tag);
};

// batch_index is 1-based; iteration counts from 0 within the batch;
// batch1_iterations is the total iteration count of batch 1.
BrnParams schedule_params(const BrnSchedule& schedule, int batch_index, int iteration,
                          int batch1_iterations);
BrnParams schedule_params(int batch_index, int iteration, std::string_view protocol,
                          int batch1_iterations);

}  // namespace rfcl
