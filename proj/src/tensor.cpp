#include "rfcl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace rfcl {

std::string to_string(const Shape3& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

Tensor::Tensor(std::vector<std::size_t> shape, real fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape product " +
                         std::to_string(shape_product(shape_)));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](real v) { return std::isfinite(v); });
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
  auto shape = shape_;
  if (shape.empty()) throw DimensionError("gather_rows on a rank-0 tensor");
  shape[0] = indices.size();
  Tensor out(shape);
  const std::size_t rs = row_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows()) throw DimensionError("gather_rows index out of range");
    std::memcpy(out.data_.data() + i * rs, data_.data() + indices[i] * rs, rs * sizeof(real));
  }
  return out;
}

}  // namespace rfcl
