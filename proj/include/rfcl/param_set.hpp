#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfcl/common.hpp"

namespace rfcl {

enum class LayerKind { Dense, Depthwise, Pointwise, Activation, Normalization, Head };

std::string_view kind_name(LayerKind kind);

enum class ParamRole { Weight, Bias, Scale, Shift };

std::string_view role_name(ParamRole role);

// A contiguous run of the flat parameter vector owned by one layer.
struct ParamBlock {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::Dense;
  ParamRole role = ParamRole::Weight;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Every trainable scalar of a network laid out in one flat index space,
// with a learning-rate scale per scalar (1 unless frozen or modulated).
class ParamSet {
 public:
  std::size_t add_block(std::size_t layer, LayerKind kind, ParamRole role, std::size_t size,
                        real init = 0.0);

  std::size_t size() const { return values_.size(); }
  std::span<real> values() { return values_; }
  std::span<const real> values() const { return values_; }
  std::span<real> lr_scale() { return lr_scale_; }
  std::span<const real> lr_scale() const { return lr_scale_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  // Block of `layer` with `role`, or nullptr.
  const ParamBlock* find(std::size_t layer, ParamRole role) const;
  std::span<real> view(std::size_t layer, ParamRole role);
  std::span<const real> view(std::size_t layer, ParamRole role) const;

  const ParamBlock& block_of(std::size_t flat_index) const;
  // Human-readable name of a flat index, e.g. "layer 3 (pointwise) weight[7]".
  std::string describe(std::size_t flat_index) const;

  bool operator==(const ParamSet&) const;

 private:
  std::vector<ParamBlock> blocks_;
  std::vector<real> values_;
  std::vector<real> lr_scale_;
};

// Gradient (or any per-parameter quantity) aligned with a ParamSet's flat index.
using Gradient = std::vector<real>;

}  // namespace rfcl
