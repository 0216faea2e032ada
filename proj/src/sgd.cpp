#include "rfcl/sgd.hpp"

#include <cmath>

namespace rfcl {

void SgdConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("learning rate must be finite and > 0");
  if (mini_batch_size == 0) throw ConfigError("mini_batch_size must be positive");
  if (epochs_per_batch <= 0) throw ConfigError("epochs_per_batch must be positive");
}

void check_finite_gradient(const ParamSet& params, std::span<const real> grads) {
  if (grads.size() != params.size()) {
    throw DimensionError("gradient has " + std::to_string(grads.size()) + " entries, parameter set " +
                         std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw NumericError("non-finite gradient " + std::to_string(grads[k]) + " at " +
                         params.describe(k));
    }
  }
}

void sgd_step(ParamSet& params, std::span<const real> grads, real eta) {
  check_finite_gradient(params, grads);
  auto theta = params.values();
  auto scale = params.lr_scale();
  for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= eta * scale[k] * grads[k];
}

void freeze_layers(ParamSet& params, const std::function<bool(LayerKind)>& selector) {
  auto scale = params.lr_scale();
  for (const ParamBlock& b : params.blocks()) {
    if (!selector(b.kind)) continue;
    for (std::size_t k = b.offset; k < b.offset + b.size; ++k) scale[k] = 0.0;
  }
}

}  // namespace rfcl
