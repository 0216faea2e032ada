#include "rfcl/param_set.hpp"

#include <algorithm>

namespace rfcl {

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Depthwise: return "depthwise";
    case LayerKind::Pointwise: return "pointwise";
    case LayerKind::Activation: return "activation";
    case LayerKind::Normalization: return "normalization";
    case LayerKind::Head: return "head";
  }
  return "?";
}

std::string_view role_name(ParamRole role) {
  switch (role) {
    case ParamRole::Weight: return "weight";
    case ParamRole::Bias: return "bias";
    case ParamRole::Scale: return "scale";
    case ParamRole::Shift: return "shift";
  }
  return "?";
}

std::size_t ParamSet::add_block(std::size_t layer, LayerKind kind, ParamRole role,
                                std::size_t size, real init) {
  const std::size_t offset = values_.size();
  blocks_.push_back({layer, kind, role, offset, size});
  values_.resize(offset + size, init);
  lr_scale_.resize(offset + size, 1.0);
  return offset;
}

const ParamBlock* ParamSet::find(std::size_t layer, ParamRole role) const {
  auto it = std::find_if(blocks_.begin(), blocks_.end(), [&](const ParamBlock& b) {
    return b.layer == layer && b.role == role;
  });
  return it == blocks_.end() ? nullptr : &*it;
}

std::span<real> ParamSet::view(std::size_t layer, ParamRole role) {
  const ParamBlock* b = find(layer, role);
  if (!b) {
    throw DimensionError("layer " + std::to_string(layer) + " has no " +
                         std::string(role_name(role)) + " parameters");
  }
  return values().subspan(b->offset, b->size);
}

std::span<const real> ParamSet::view(std::size_t layer, ParamRole role) const {
  const ParamBlock* b = find(layer, role);
  if (!b) {
    throw DimensionError("layer " + std::to_string(layer) + " has no " +
                         std::string(role_name(role)) + " parameters");
  }
  return values().subspan(b->offset, b->size);
}

const ParamBlock& ParamSet::block_of(std::size_t flat_index) const {
  // Blocks are appended in offset order.
  auto it = std::upper_bound(blocks_.begin(), blocks_.end(), flat_index,
                             [](std::size_t k, const ParamBlock& b) { return k < b.offset; });
  if (it == blocks_.begin() || flat_index >= values_.size()) {
    throw DimensionError("parameter index " + std::to_string(flat_index) + " out of range");
  }
  return *std::prev(it);
}

std::string ParamSet::describe(std::size_t flat_index) const {
  const ParamBlock& b = block_of(flat_index);
  return "layer " + std::to_string(b.layer) + " (" + std::string(kind_name(b.kind)) + ") " +
         std::string(role_name(b.role)) + "[" + std::to_string(flat_index - b.offset) + "]";
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.layer != b.layer || a.kind != b.kind || a.role != b.role || a.offset != b.offset ||
        a.size != b.size) {
      return false;
    }
  }
  return values_ == other.values_ && lr_scale_ == other.lr_scale_;
}

}  // namespace rfcl
