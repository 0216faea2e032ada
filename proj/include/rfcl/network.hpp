#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfcl/common.hpp"
#include "rfcl/normalization.hpp"
#include "rfcl/param_set.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

enum class NormKind { BatchNorm, BatchRenorm };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  Shape3 in;
  Shape3 out;
  std::size_t kernel = 0;  // depthwise filter size
};

struct NetworkSpec {
  Shape3 input;
  std::vector<LayerSpec> layers;
  NormKind norm = NormKind::BatchRenorm;
  real epsilon = 1e-5;
};

// Builds a layer stack from a comma-separated description:
//   dw<k>   depthwise k x k convolution (one filter per channel, same padding)
//   pw<c>   pointwise 1x1 convolution to c channels
//   fc<n>   dense layer with n units (flattens its input)
//   norm    BN or BRN, per `norm`
//   relu    rectifier
//   head    dense output layer with `num_classes` units; must be last
// e.g. "dw3,norm,relu,pw8,norm,relu,fc32,norm,relu,head".
NetworkSpec parse_architecture(std::string_view arch, Shape3 input, std::size_t num_classes,
                               NormKind norm = NormKind::BatchRenorm);

enum class Mode { Train, Eval };

// Activations of one forward pass. Train-mode caches feed backward().
struct ForwardCache {
  Mode mode = Mode::Eval;
  std::uint64_t network_id = 0;
  std::uint64_t params_version = 0;
  // activations[0] is the input; activations[i + 1] is the output of layer i.
  std::vector<Tensor> activations;
  // Indexed by layer; engaged for normalization layers in train mode.
  std::vector<std::optional<NormCache>> norm;

  const Tensor& logits() const { return activations.back(); }
};

// Feed-forward stack with exact hand-derived gradients.
//
// A Network is single-writer. Its parameters are reached through params();
// the non-const overload bumps a version counter so a cache produced before
// a parameter change is rejected by backward().
class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<LayerSpec>& layers() const { return spec_.layers; }
  std::size_t num_classes() const;
  std::size_t head_layer() const;
  // Width of the representation feeding the head.
  std::size_t feature_size() const;

  const ParamSet& params() const { return params_; }
  ParamSet& params() {
    ++version_;
    return params_;
  }

  const std::vector<BrnLayerState>& norm_states() const { return norm_states_; }
  std::vector<BrnLayerState>& norm_states() { return norm_states_; }
  // Index into norm_states() for a normalization layer, or -1.
  int norm_slot(std::size_t layer) const { return norm_slot_[layer]; }
  void set_norm_params(const BrnParams& p);

  // Input rows must match spec().input.size(). Throws DimensionError naming
  // the first layer that cannot accept its input.
  ForwardCache forward(const Tensor& input, Mode mode) const;
  // Eval-mode representation feeding the head, [batch, feature_size()].
  Tensor features(const Tensor& input) const;
  // Eval-mode logits.
  Tensor predict_logits(const Tensor& input) const;

  // Gradient of mean softmax cross-entropy w.r.t. every parameter.
  Gradient backward(const ForwardCache& cache, std::span<const int> labels) const;

  // Folds the mini-batch moments of a train-mode cache into the moving moments.
  void update_moving_moments(const ForwardCache& cache);

  std::uint64_t id() const { return id_; }
  std::uint64_t version() const { return version_; }

 private:
  void check_input(const Tensor& input) const;

  NetworkSpec spec_;
  ParamSet params_;
  std::vector<BrnLayerState> norm_states_;
  std::vector<int> norm_slot_;
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
};

// Mean over the mini-batch of -log softmax(logits)[label].
real cross_entropy_loss(const Tensor& logits, std::span<const int> labels);
// (softmax - onehot) / batch
Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels);

// Index of the largest entry of each row; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace rfcl
