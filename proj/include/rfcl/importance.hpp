#pragma once

// Per-parameter importance for EWC and learning-rate modulation (AR1*).

#include <optional>
#include <span>
#include <vector>

#include "rfcl/param_set.hpp"

namespace rfcl {

struct ImportanceState {
  std::vector<real> F;  // clipped to [0, max_f]
  // Anchor theta*; held only by EWC.
  std::optional<std::vector<real>> anchor;
  // Running sum of -g_k * dtheta_k over the current batch.
  std::vector<real> trajectory;
  // Parameters at the start of the current batch.
  std::vector<real> batch_start;
  real max_f = 0.001;
  real lambda = 2.0e6;
  real w_past = 0.5;
  real w_cur = 0.5;
  real damping = 1e-3;

  ImportanceState() = default;
  ImportanceState(std::size_t num_params, bool with_anchor);

  std::size_t size() const { return F.size(); }
  void validate() const;
};

// (lambda / 2) * sum_k F_k (theta_k - theta*_k)^2. Throws ConfigError
// without an anchor.
real ewc_penalty(std::span<const real> params, const ImportanceState& imp);
real ewc_penalized_loss(real cross_entropy, std::span<const real> params,
                        const ImportanceState& imp);

// theta_k <- theta_k - eta * s_k * (g_k + lambda * F_k * (theta_k - theta*_k)),
// the gradient step of the penalized loss. A missing anchor is a plain step.
void ewc_update(ParamSet& params, std::span<const real> grads, const ImportanceState& imp,
                real eta);

// theta_k <- theta_k - eta * s_k * (1 - F_k / max_f) * g_k.
// Throws NumericError if some F_k lies outside [0, max_f].
void lr_modulated_update(ParamSet& params, std::span<const real> grads,
                         const ImportanceState& imp, real eta);

// Records the parameters at the start of a batch and clears the trajectory.
void si_begin_batch(ImportanceState& imp, std::span<const real> params);
// trajectory_k += -g_k * delta_k
void si_accumulate(ImportanceState& imp, std::span<const real> grads,
                   std::span<const real> delta);
// omega_k = trajectory_k / ((theta_k - start_k)^2 + damping)
std::vector<real> si_omega(const ImportanceState& imp, std::span<const real> params);

// F <- clip(w_past * F + w_cur * omega, [0, max_f]); anchors (when held) move
// to the current parameters; the trajectory restarts from them.
void fisher_consolidate(ImportanceState& imp, std::span<const real> params,
                        std::span<const real> omega);
// Same, with omega taken from the SI trajectory.
void fisher_consolidate(ImportanceState& imp, std::span<const real> params);

}  // namespace rfcl
