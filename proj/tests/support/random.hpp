#pragma once

#include <cstring>
#include <random>
#include <span>
#include <vector>

#include "rfcl/tensor.hpp"

namespace rfcl::testing {

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

inline std::vector<int> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(0, classes - 1);
  std::vector<int> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

inline bool bit_identical(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace rfcl::testing
