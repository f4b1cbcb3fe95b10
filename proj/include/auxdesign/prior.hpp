#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "auxdesign/core.hpp"
#include "auxdesign/design_space.hpp"

namespace auxdesign {

enum class PriorKind {
  MultivariateNormal,    ///< a = mean, cov = covariance
  LogNormalIndependent,  ///< a = log-means, b = log-variances
  Gamma,                 ///< a = means, b = variances
  Uniform,               ///< a = lower, b = upper
  SqrtBivariateNormal,   ///< (sqrt(theta_i), sqrt(theta_j)) ~ N(a, cov)
};

/// One independent block of the prior acting on `indices` of theta.
struct PriorBlock {
  PriorKind kind = PriorKind::Uniform;
  std::vector<std::size_t> indices;
  Vector a;
  Vector b;
  Matrix cov;
  /// MultivariateNormal only: restrict support to theta >= 0 (by rejection).
  bool nonnegative = false;
};

class Prior {
 public:
  Prior() = default;
  /// Validates every block; the blocks must cover 0..dim-1 exactly once.
  explicit Prior(std::vector<PriorBlock> blocks);

  static PriorBlock multivariate_normal(std::vector<std::size_t> idx, Vector mean, Matrix cov,
                                        bool nonnegative = false);
  static PriorBlock lognormal(std::vector<std::size_t> idx, Vector log_mean, Vector log_var);
  static PriorBlock gamma(std::vector<std::size_t> idx, Vector mean, Vector var);
  static PriorBlock uniform(std::vector<std::size_t> idx, Vector lo, Vector hi);
  static PriorBlock sqrt_bivariate_normal(std::size_t i, std::size_t j, Vector mean, Matrix cov);

  std::size_t dim() const { return dim_; }
  const std::vector<PriorBlock>& blocks() const { return blocks_; }

  Vector sample(Rng& rng) const;
  std::vector<Vector> sample(std::size_t count, Rng& rng) const;
  /// Finite on the support, -inf off it.
  double log_density(const Vector& theta) const;
  /// Central 0.1%-99.9% range of the marginal of theta_i; used to scale
  /// emulator inputs.
  Interval marginal_range(std::size_t i) const;

 private:
  std::vector<PriorBlock> blocks_;
  std::vector<Matrix> chol_;  // lower Cholesky factor per block (normal kinds)
  std::size_t dim_ = 0;
};

}  // namespace auxdesign
