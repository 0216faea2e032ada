#pragma once

#include <functional>
#include <span>

#include "rfcl/param_set.hpp"

namespace rfcl {

// Plain SGD, no momentum.
struct SgdConfig {
  real eta = 0.001;
  std::size_t mini_batch_size = 128;
  int epochs_per_batch = 1;

  void validate() const;
};

// Throws NumericError naming the first parameter whose gradient is not finite.
void check_finite_gradient(const ParamSet& params, std::span<const real> grads);

// theta_k <- theta_k - eta * lr_scale_k * g_k. Nothing is written if any
// gradient is non-finite.
void sgd_step(ParamSet& params, std::span<const real> grads, real eta);
inline void sgd_step(ParamSet& params, std::span<const real> grads, const SgdConfig& cfg) {
  sgd_step(params, grads, cfg.eta);
}

// Sets lr_scale to 0 for every parameter of the layers whose kind matches.
void freeze_layers(ParamSet& params, const std::function<bool(LayerKind)>& selector);

}  // namespace rfcl
