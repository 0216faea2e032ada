#pragma once

// Central finite-difference oracle for network gradients. Independent of
// Network::backward: it only calls forward() and the loss.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rfcl/network.hpp"

namespace rfcl::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // parameters whose +-h probes straddle a ReLU kink
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// Sign pattern of every rectifier input; used to detect probes crossing a kink.
inline std::vector<bool> relu_pattern(const Network& net, const ForwardCache& c) {
  std::vector<bool> mask;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (net.layers()[i].kind != LayerKind::Activation) continue;
    for (double v : c.activations[i].data()) mask.push_back(v > 0.0);
  }
  return mask;
}

// Five-point central stencil with step h:
//   f'(x) ~ (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / (12 h)
// Truncation error is O(h^4), so h = 1e-4 leaves only round-off (~1e-12).
inline GradCheckResult check_gradients(Network net, const Tensor& x, const std::vector<int>& labels,
                                       double step = 1e-4) {
  GradCheckResult r;
  const ForwardCache base = net.forward(x, Mode::Train);
  const Gradient analytic = net.backward(base, labels);
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    const double orig = net.params().values()[k];
    double f[4];
    std::vector<bool> pattern;
    bool kink = false;
    const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
    for (int j = 0; j < 4; ++j) {
      net.params().values()[k] = orig + offsets[j] * step;
      const ForwardCache c = net.forward(x, Mode::Train);
      f[j] = cross_entropy_loss(c.logits(), labels);
      auto p = relu_pattern(net, c);
      if (j == 0) {
        pattern = std::move(p);
      } else if (p != pattern) {
        kink = true;
      }
    }
    net.params().values()[k] = orig;
    if (kink) {
      ++r.skipped_kinks;
      continue;
    }
    const double numeric = (-f[0] + 8.0 * f[1] - 8.0 * f[2] + f[3]) / (12.0 * step);
    const double e = relative_error(analytic[k], numeric);
    ++r.checked;
    if (e > r.max_rel_error) {
      r.max_rel_error = e;
      r.worst_index = k;
    }
  }
  return r;
}

}  // namespace rfcl::testing
