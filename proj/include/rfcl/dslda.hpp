#pragma once

// Streaming linear discriminant analysis over fixed features.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rfcl/common.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

struct DsldaState {
  std::size_t dim = 0;
  real shrinkage = 1e-4;
  Eigen::MatrixXd means;              // [classes, dim]
  Eigen::MatrixXd scatter;            // within-class scatter, [dim, dim]
  std::vector<std::size_t> counts;    // per class
  std::size_t total = 0;

  DsldaState() = default;
  DsldaState(std::size_t num_classes, std::size_t feature_dim, real shrinkage = 1e-4);

  std::size_t classes() const { return counts.size(); }
  // Shared covariance: scatter / total (zero before any sample).
  Eigen::MatrixXd covariance() const;
};

// One Welford step: delta = x - mu_c; mu_c += delta / (n_c + 1);
// scatter += n_c / (n_c + 1) * delta delta^T.
void dslda_update(DsldaState& state, std::span<const real> x, int label);

// Linear discriminant classifier from a snapshot of the state.
// Sigma_s = (1 - shrinkage) * Sigma + shrinkage * I, Lambda = Sigma_s^-1,
// score_c = mu_c^T Lambda x - 0.5 mu_c^T Lambda mu_c over classes seen so far.
class DsldaClassifier {
 public:
  // Throws NumericError when Sigma_s is not positive definite.
  explicit DsldaClassifier(const DsldaState& state);

  // Ties go to the lowest class index. With no class seen, predicts 0.
  int predict(std::span<const real> x) const;
  std::vector<int> predict(const Tensor& x) const;
  Eigen::VectorXd scores(std::span<const real> x) const;

 private:
  std::size_t dim_ = 0;
  std::vector<int> seen_;
  Eigen::MatrixXd weights_;  // rows: Lambda mu_c for seen classes
  Eigen::VectorXd bias_;     // -0.5 mu_c^T Lambda mu_c
};

int dslda_predict(const DsldaState& state, std::span<const real> x);

}  // namespace rfcl
