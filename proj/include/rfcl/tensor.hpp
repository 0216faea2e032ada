#pragma once

#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "rfcl/common.hpp"

namespace rfcl {

// Dense row-major tensor. The first dimension is the mini-batch.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, real fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<real> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Number of rows along the first dimension and elements per row.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t row_size() const { return rows() == 0 ? 0 : data_.size() / rows(); }

  std::span<real> data() { return data_; }
  std::span<const real> data() const { return data_; }
  std::span<real> row(std::size_t n) { return data().subspan(n * row_size(), row_size()); }
  std::span<const real> row(std::size_t n) const {
    return data().subspan(n * row_size(), row_size());
  }

  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const;

  // Gather a subset of rows into a new tensor.
  Tensor gather_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<real> data_;
};

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

}  // namespace rfcl
