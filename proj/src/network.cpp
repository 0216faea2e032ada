#include "rfcl/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>

#include "rfcl/kernels.hpp"

namespace rfcl {
namespace {

namespace k = kernels::parallel;

std::atomic<std::uint64_t> g_next_network_id{1};

std::string layer_label(std::size_t i, LayerKind kind) {
  return "layer " + std::to_string(i) + " (" + std::string(kind_name(kind)) + ")";
}

std::size_t parse_count(std::string_view token, std::size_t prefix) {
  const std::string digits(token.substr(prefix));
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
    throw ConfigError("architecture token '" + std::string(token) + "' needs a positive size");
  }
  const auto v = std::stoul(digits);
  if (v == 0) throw ConfigError("architecture token '" + std::string(token) + "' has size 0");
  return v;
}

}  // namespace

NetworkSpec parse_architecture(std::string_view arch, Shape3 input, std::size_t num_classes,
                               NormKind norm) {
  if (input.size() == 0) throw ConfigError("network input shape is empty");
  if (num_classes == 0) throw ConfigError("network needs at least one class");
  NetworkSpec spec;
  spec.input = input;
  spec.norm = norm;
  Shape3 cur = input;
  std::size_t pos = 0;
  while (pos <= arch.size()) {
    std::size_t end = arch.find(',', pos);
    if (end == std::string_view::npos) end = arch.size();
    std::string_view tok = arch.substr(pos, end - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    pos = end + 1;
    if (tok.empty()) {
      if (end == arch.size()) break;
      throw ConfigError("empty token in architecture '" + std::string(arch) + "'");
    }
    if (!spec.layers.empty() && spec.layers.back().kind == LayerKind::Head) {
      throw ConfigError("'head' must be the last architecture token");
    }
    LayerSpec l;
    l.in = cur;
    if (tok.starts_with("dw")) {
      l.kind = LayerKind::Depthwise;
      l.kernel = parse_count(tok, 2);
      if (l.kernel % 2 == 0) throw ConfigError("depthwise kernel size must be odd");
      if (cur.height == 1 && cur.width == 1 && l.kernel > 1) {
        throw ConfigError("depthwise layer after flattening");
      }
      l.out = cur;
    } else if (tok.starts_with("pw")) {
      l.kind = LayerKind::Pointwise;
      l.out = {parse_count(tok, 2), cur.height, cur.width};
    } else if (tok.starts_with("fc")) {
      l.kind = LayerKind::Dense;
      l.out = {parse_count(tok, 2), 1, 1};
    } else if (tok == "norm" || tok == "bn" || tok == "brn") {
      l.kind = LayerKind::Normalization;
      l.out = cur;
    } else if (tok == "relu") {
      l.kind = LayerKind::Activation;
      l.out = cur;
    } else if (tok == "head") {
      l.kind = LayerKind::Head;
      l.out = {num_classes, 1, 1};
    } else {
      throw ConfigError("unknown architecture token '" + std::string(tok) + "'");
    }
    cur = l.out;
    spec.layers.push_back(l);
  }
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::Head) {
    throw ConfigError("architecture must end with 'head'");
  }
  return spec;
}

Network::Network(NetworkSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), id_(g_next_network_id.fetch_add(1)) {
  std::mt19937_64 rng(seed);
  auto init_uniform = [&](std::span<real> w, std::size_t fan_in) {
    const real a = 1.0 / std::sqrt(static_cast<real>(fan_in));
    std::uniform_real_distribution<real> dist(-a, a);
    for (auto& v : w) v = dist(rng);
  };

  Shape3 cur = spec_.input;
  norm_slot_.assign(spec_.layers.size(), -1);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (!(l.in == cur)) {
      throw DimensionError(layer_label(i, l.kind) + ": expects input " + to_string(l.in) +
                           " but previous layer produces " + to_string(cur));
    }
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Head: {
        const std::size_t off = params_.add_block(i, l.kind, ParamRole::Weight,
                                                  l.out.size() * l.in.size());
        params_.add_block(i, l.kind, ParamRole::Bias, l.out.size());
        init_uniform(params_.values().subspan(off, l.out.size() * l.in.size()), l.in.size());
        break;
      }
      case LayerKind::Depthwise: {
        const std::size_t n = l.in.channels * l.kernel * l.kernel;
        const std::size_t off = params_.add_block(i, l.kind, ParamRole::Weight, n);
        params_.add_block(i, l.kind, ParamRole::Bias, l.in.channels);
        init_uniform(params_.values().subspan(off, n), l.kernel * l.kernel);
        break;
      }
      case LayerKind::Pointwise: {
        const std::size_t n = l.out.channels * l.in.channels;
        const std::size_t off = params_.add_block(i, l.kind, ParamRole::Weight, n);
        params_.add_block(i, l.kind, ParamRole::Bias, l.out.channels);
        init_uniform(params_.values().subspan(off, n), l.in.channels);
        break;
      }
      case LayerKind::Normalization: {
        params_.add_block(i, l.kind, ParamRole::Scale, l.in.channels, 1.0);
        params_.add_block(i, l.kind, ParamRole::Shift, l.in.channels, 0.0);
        norm_slot_[i] = static_cast<int>(norm_states_.size());
        BrnLayerState st(l.in.channels);
        st.epsilon = spec_.epsilon;
        norm_states_.push_back(std::move(st));
        break;
      }
      case LayerKind::Activation:
        break;
    }
    cur = l.out;
  }
}

std::size_t Network::num_classes() const { return spec_.layers.back().out.size(); }

std::size_t Network::head_layer() const { return spec_.layers.size() - 1; }

std::size_t Network::feature_size() const { return spec_.layers.back().in.size(); }

void Network::set_norm_params(const BrnParams& p) {
  for (auto& st : norm_states_) {
    st.r_max = p.r_max;
    st.d_max = p.d_max;
    st.alpha_past = p.alpha_past;
  }
}

void Network::check_input(const Tensor& input) const {
  if (input.rank() != 2 || input.row_size() != spec_.input.size() || input.rows() == 0) {
    std::ostringstream os;
    os << layer_label(0, spec_.layers.front().kind) << ": expected [batch, "
       << spec_.input.size() << "] input (" << to_string(spec_.input) << " per pattern), got [";
    for (std::size_t i = 0; i < input.rank(); ++i) os << (i ? ", " : "") << input.dim(i);
    os << "]";
    throw DimensionError(os.str());
  }
}

ForwardCache Network::forward(const Tensor& input, Mode mode) const {
  check_input(input);
  ForwardCache cache;
  cache.mode = mode;
  cache.network_id = id_;
  cache.params_version = version_;
  cache.activations.reserve(spec_.layers.size() + 1);
  cache.activations.push_back(input);
  cache.norm.resize(spec_.layers.size());
  const std::size_t batch = input.rows();

  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const Tensor& x = cache.activations.back();
    Tensor y({batch, l.out.size()});
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Head:
        k::dense_forward({batch, l.in.size(), l.out.size()}, x.data(),
                         params_.view(i, ParamRole::Weight), params_.view(i, ParamRole::Bias),
                         y.data());
        break;
      case LayerKind::Depthwise:
        k::depthwise_forward({batch, l.in.channels, l.in.height, l.in.width, l.kernel}, x.data(),
                             params_.view(i, ParamRole::Weight), params_.view(i, ParamRole::Bias),
                             y.data());
        break;
      case LayerKind::Pointwise:
        k::pointwise_forward({batch, l.in.channels, l.out.channels, l.in.spatial()}, x.data(),
                             params_.view(i, ParamRole::Weight), params_.view(i, ParamRole::Bias),
                             y.data());
        break;
      case LayerKind::Activation:
        for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
        break;
      case LayerKind::Normalization: {
        const BrnLayerState& st = norm_states_[static_cast<std::size_t>(norm_slot_[i])];
        const auto scale = params_.view(i, ParamRole::Scale);
        const auto shift = params_.view(i, ParamRole::Shift);
        if (mode == Mode::Eval) {
          y = brn_forward_eval(x, st, scale, shift);
        } else {
          NormOutput out = spec_.norm == NormKind::BatchNorm
                               ? bn_forward_train(x, st, scale, shift)
                               : brn_forward_train(x, st, scale, shift);
          y = std::move(out.y);
          cache.norm[i] = std::move(out.cache);
        }
        break;
      }
    }
    cache.activations.push_back(std::move(y));
  }
  return cache;
}

Tensor Network::features(const Tensor& input) const {
  ForwardCache c = forward(input, Mode::Eval);
  return std::move(c.activations[c.activations.size() - 2]);
}

Tensor Network::predict_logits(const Tensor& input) const {
  ForwardCache c = forward(input, Mode::Eval);
  return std::move(c.activations.back());
}

Gradient Network::backward(const ForwardCache& cache, std::span<const int> labels) const {
  if (cache.mode != Mode::Train) throw ConfigError("backward needs a train-mode forward cache");
  if (cache.network_id != id_ || cache.params_version != version_) {
    throw ConfigError("backward: stale activations (parameters changed since the forward pass)");
  }
  if (cache.activations.size() != spec_.layers.size() + 1) {
    throw DimensionError("backward: activation count does not match the layer stack");
  }
  const std::size_t batch = cache.activations.front().rows();
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (cache.activations[i + 1].rows() != batch ||
        cache.activations[i + 1].row_size() != spec_.layers[i].out.size()) {
      throw DimensionError("backward: activation shape mismatch at " +
                           layer_label(i, spec_.layers[i].kind));
    }
  }

  Gradient grad(params_.size(), 0.0);
  auto gview = [&](std::size_t layer, ParamRole role) {
    const ParamBlock* b = params_.find(layer, role);
    return std::span<real>(grad).subspan(b->offset, b->size);
  };

  Tensor dy = cross_entropy_grad(cache.logits(), labels);
  for (std::size_t ii = spec_.layers.size(); ii-- > 0;) {
    const LayerSpec& l = spec_.layers[ii];
    const Tensor& x = cache.activations[ii];
    Tensor dx({batch, l.in.size()});
    switch (l.kind) {
      case LayerKind::Dense:
      case LayerKind::Head: {
        const kernels::DenseDims d{batch, l.in.size(), l.out.size()};
        k::dense_backward_params(d, x.data(), dy.data(), gview(ii, ParamRole::Weight),
                                 gview(ii, ParamRole::Bias));
        if (ii > 0) k::dense_backward_input(d, params_.view(ii, ParamRole::Weight), dy.data(), dx.data());
        break;
      }
      case LayerKind::Depthwise: {
        const kernels::DepthwiseDims d{batch, l.in.channels, l.in.height, l.in.width, l.kernel};
        k::depthwise_backward_params(d, x.data(), dy.data(), gview(ii, ParamRole::Weight),
                                     gview(ii, ParamRole::Bias));
        if (ii > 0) {
          k::depthwise_backward_input(d, params_.view(ii, ParamRole::Weight), dy.data(), dx.data());
        }
        break;
      }
      case LayerKind::Pointwise: {
        const kernels::PointwiseDims d{batch, l.in.channels, l.out.channels, l.in.spatial()};
        k::pointwise_backward_params(d, x.data(), dy.data(), gview(ii, ParamRole::Weight),
                                     gview(ii, ParamRole::Bias));
        if (ii > 0) {
          k::pointwise_backward_input(d, params_.view(ii, ParamRole::Weight), dy.data(), dx.data());
        }
        break;
      }
      case LayerKind::Activation:
        // Subgradient 0 at x = 0.
        for (std::size_t j = 0; j < x.size(); ++j) dx[j] = x[j] > 0.0 ? dy[j] : 0.0;
        break;
      case LayerKind::Normalization: {
        if (!cache.norm[ii]) throw ConfigError("backward: missing normalization cache");
        norm_backward(*cache.norm[ii], params_.view(ii, ParamRole::Scale), dy, dx,
                      gview(ii, ParamRole::Scale), gview(ii, ParamRole::Shift));
        break;
      }
    }
    dy = std::move(dx);
  }
  return grad;
}

void Network::update_moving_moments(const ForwardCache& cache) {
  if (cache.mode != Mode::Train || cache.network_id != id_) {
    throw ConfigError("moving moments need a train-mode cache from this network");
  }
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (norm_slot_[i] < 0) continue;
    if (!cache.norm[i]) throw ConfigError("moving moments: missing normalization cache");
    rfcl::update_moving_moments(norm_states_[static_cast<std::size_t>(norm_slot_[i])],
                                cache.norm[i]->moments);
  }
}

real cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) {
    throw DimensionError("cross-entropy: " + std::to_string(logits.rows()) + " logit rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t classes = logits.row_size();
  real total = 0.0;
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw DimensionError("cross-entropy: label " + std::to_string(labels[n]) +
                           " outside [0, " + std::to_string(classes) + ")");
    }
    auto row = logits.row(n);
    const real m = *std::max_element(row.begin(), row.end());
    real s = 0.0;
    for (real v : row) s += std::exp(v - m);
    total += (m + std::log(s)) - row[static_cast<std::size_t>(labels[n])];
  }
  return total / static_cast<real>(logits.rows());
}

Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) {
    throw DimensionError("cross-entropy: logit rows and label count differ");
  }
  const std::size_t classes = logits.row_size();
  Tensor g(logits.shape());
  const real inv_n = 1.0 / static_cast<real>(logits.rows());
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw DimensionError("cross-entropy: label " + std::to_string(labels[n]) +
                           " outside [0, " + std::to_string(classes) + ")");
    }
    auto row = logits.row(n);
    auto out = g.row(n);
    const real m = *std::max_element(row.begin(), row.end());
    real s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      out[c] = std::exp(row[c] - m);
      s += out[c];
    }
    for (std::size_t c = 0; c < classes; ++c) out[c] = out[c] / s * inv_n;
    out[static_cast<std::size_t>(labels[n])] -= inv_n;
  }
  return g;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    auto row = logits.row(n);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[n] = static_cast<int>(best);
  }
  return out;
}

}  // namespace rfcl
