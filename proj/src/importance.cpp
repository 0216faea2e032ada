#include "rfcl/importance.hpp"

#include <algorithm>
#include <cmath>

#include "rfcl/sgd.hpp"

namespace rfcl {
namespace {

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + " has " + std::to_string(got) +
                         " entries, importance state " + std::to_string(want));
  }
}

}  // namespace

ImportanceState::ImportanceState(std::size_t num_params, bool with_anchor)
    : F(num_params, 0.0),
      trajectory(num_params, 0.0),
      batch_start(num_params, 0.0) {
  if (with_anchor) anchor.emplace(num_params, 0.0);
}

void ImportanceState::validate() const {
  if (!(max_f > 0.0) || !std::isfinite(max_f)) throw ConfigError("max_f must be finite and > 0");
  if (lambda < 0.0 || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (w_past < 0.0 || w_cur < 0.0) throw ConfigError("merge weights must be >= 0");
  if (!(damping > 0.0)) throw ConfigError("SI damping must be > 0");
}

real ewc_penalty(std::span<const real> params, const ImportanceState& imp) {
  if (!imp.anchor) throw ConfigError("EWC penalty needs an anchor");
  check_size(params.size(), imp.size(), "parameter vector");
  real sum = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const real d = params[k] - (*imp.anchor)[k];
    sum += imp.F[k] * d * d;
  }
  return 0.5 * imp.lambda * sum;
}

real ewc_penalized_loss(real cross_entropy, std::span<const real> params,
                        const ImportanceState& imp) {
  return cross_entropy + ewc_penalty(params, imp);
}

void ewc_update(ParamSet& params, std::span<const real> grads, const ImportanceState& imp,
                real eta) {
  check_finite_gradient(params, grads);
  check_size(params.size(), imp.size(), "parameter set");
  auto theta = params.values();
  auto scale = params.lr_scale();
  if (!imp.anchor) {
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= eta * scale[k] * grads[k];
    return;
  }
  const auto& anchor = *imp.anchor;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const real pull = imp.lambda * imp.F[k] * (theta[k] - anchor[k]);
    theta[k] -= eta * scale[k] * (grads[k] + pull);
  }
}

void lr_modulated_update(ParamSet& params, std::span<const real> grads,
                         const ImportanceState& imp, real eta) {
  check_finite_gradient(params, grads);
  check_size(params.size(), imp.size(), "parameter set");
  for (std::size_t k = 0; k < imp.F.size(); ++k) {
    if (!(imp.F[k] >= 0.0 && imp.F[k] <= imp.max_f)) {
      throw NumericError("importance " + std::to_string(imp.F[k]) + " outside [0, max_f] at " +
                         params.describe(k));
    }
  }
  auto theta = params.values();
  auto scale = params.lr_scale();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    theta[k] -= eta * scale[k] * (1.0 - imp.F[k] / imp.max_f) * grads[k];
  }
}

void si_begin_batch(ImportanceState& imp, std::span<const real> params) {
  check_size(params.size(), imp.size(), "parameter vector");
  imp.batch_start.assign(params.begin(), params.end());
  std::fill(imp.trajectory.begin(), imp.trajectory.end(), 0.0);
}

void si_accumulate(ImportanceState& imp, std::span<const real> grads,
                   std::span<const real> delta) {
  check_size(grads.size(), imp.size(), "gradient");
  check_size(delta.size(), imp.size(), "parameter delta");
  for (std::size_t k = 0; k < grads.size(); ++k) imp.trajectory[k] += -grads[k] * delta[k];
}

std::vector<real> si_omega(const ImportanceState& imp, std::span<const real> params) {
  check_size(params.size(), imp.size(), "parameter vector");
  std::vector<real> omega(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const real d = params[k] - imp.batch_start[k];
    omega[k] = imp.trajectory[k] / (d * d + imp.damping);
  }
  return omega;
}

void fisher_consolidate(ImportanceState& imp, std::span<const real> params,
                        std::span<const real> omega) {
  check_size(params.size(), imp.size(), "parameter vector");
  check_size(omega.size(), imp.size(), "importance estimate");
  for (std::size_t k = 0; k < imp.F.size(); ++k) {
    const real f = imp.w_past * imp.F[k] + imp.w_cur * omega[k];
    if (std::isnan(f)) throw NumericError("importance became NaN at parameter " + std::to_string(k));
    imp.F[k] = std::clamp(f, 0.0, imp.max_f);
  }
  if (imp.anchor) imp.anchor->assign(params.begin(), params.end());
  si_begin_batch(imp, params);
}

void fisher_consolidate(ImportanceState& imp, std::span<const real> params) {
  const std::vector<real> omega = si_omega(imp, params);
  fisher_consolidate(imp, params, omega);
}

}  // namespace rfcl
