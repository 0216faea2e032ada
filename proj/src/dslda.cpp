#include "rfcl/dslda.hpp"

#include <cmath>

namespace rfcl {
namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const real> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

}  // namespace

DsldaState::DsldaState(std::size_t num_classes, std::size_t feature_dim, real shrink)
    : dim(feature_dim),
      shrinkage(shrink),
      means(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_classes),
                                  static_cast<Eigen::Index>(feature_dim))),
      scatter(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(feature_dim),
                                    static_cast<Eigen::Index>(feature_dim))),
      counts(num_classes, 0) {
  if (!(shrink >= 0.0 && shrink <= 1.0)) throw ConfigError("shrinkage must lie in [0, 1]");
}

Eigen::MatrixXd DsldaState::covariance() const {
  if (total == 0) return Eigen::MatrixXd::Zero(scatter.rows(), scatter.cols());
  return scatter / static_cast<real>(total);
}

void dslda_update(DsldaState& state, std::span<const real> x, int label) {
  if (x.size() != state.dim) {
    throw DimensionError("DSLDA feature has " + std::to_string(x.size()) + " values, expected " +
                         std::to_string(state.dim));
  }
  if (label < 0 || static_cast<std::size_t>(label) >= state.classes()) {
    throw DimensionError("DSLDA label " + std::to_string(label) + " out of range");
  }
  const auto c = static_cast<std::size_t>(label);
  const auto n = static_cast<real>(state.counts[c]);
  auto mu = state.means.row(static_cast<Eigen::Index>(c));
  const Eigen::VectorXd delta = as_vector(x) - mu.transpose();
  mu += (delta / (n + 1.0)).transpose();
  // u u^T with u = sqrt(n / (n + 1)) delta keeps the scatter exactly symmetric.
  const Eigen::VectorXd u = std::sqrt(n / (n + 1.0)) * delta;
  state.scatter.noalias() += u * u.transpose();
  ++state.counts[c];
  ++state.total;
}

DsldaClassifier::DsldaClassifier(const DsldaState& state) : dim_(state.dim) {
  for (std::size_t c = 0; c < state.classes(); ++c) {
    if (state.counts[c] > 0) seen_.push_back(static_cast<int>(c));
  }
  if (seen_.empty()) return;
  const auto d = static_cast<Eigen::Index>(state.dim);
  const Eigen::MatrixXd sigma = (1.0 - state.shrinkage) * state.covariance() +
                                state.shrinkage * Eigen::MatrixXd::Identity(d, d);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericError("DSLDA shrunk covariance is not positive definite");
  }
  Eigen::MatrixXd mu(static_cast<Eigen::Index>(seen_.size()), d);
  for (std::size_t i = 0; i < seen_.size(); ++i) {
    mu.row(static_cast<Eigen::Index>(i)) = state.means.row(seen_[i]);
  }
  weights_ = llt.solve(mu.transpose()).transpose();
  if (!weights_.allFinite()) throw NumericError("DSLDA precision solve produced non-finite values");
  bias_ = -0.5 * (weights_.cwiseProduct(mu)).rowwise().sum();
}

Eigen::VectorXd DsldaClassifier::scores(std::span<const real> x) const {
  if (x.size() != dim_) throw DimensionError("DSLDA query has wrong feature size");
  if (seen_.empty()) return {};
  return weights_ * as_vector(x) + bias_;
}

int DsldaClassifier::predict(std::span<const real> x) const {
  if (seen_.empty()) {
    if (x.size() != dim_) throw DimensionError("DSLDA query has wrong feature size");
    return 0;
  }
  const Eigen::VectorXd s = scores(x);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  return seen_[static_cast<std::size_t>(best)];
}

std::vector<int> DsldaClassifier::predict(const Tensor& x) const {
  std::vector<int> out(x.rows());
  for (std::size_t n = 0; n < x.rows(); ++n) out[n] = predict(x.row(n));
  return out;
}

int dslda_predict(const DsldaState& state, std::span<const real> x) {
  return DsldaClassifier(state).predict(x);
}

}  // namespace rfcl
