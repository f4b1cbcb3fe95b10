#pragma once

#include <span>

#include "auxdesign/core.hpp"

namespace auxdesign {

/// `Standard` is the normalized t-copula density; `Paper` evaluates the
/// unnormalized ratio |R|^{-1/2} [(delta + v'v) / (delta + v'R^{-1}v)]^{(delta+n)/2}.
enum class CopulaDensity { Standard, Paper };

inline constexpr double kDeltaMin = 2.5;
inline constexpr double kDeltaMax = 350.0;
inline constexpr double kMaxAbsCorrelation = 0.999;

class TCopula {
 public:
  TCopula() = default;
  /// Throws FitError unless R is a positive definite correlation matrix.
  TCopula(Matrix R, double delta);

  std::size_t dim() const { return static_cast<std::size_t>(R_.rows()); }
  const Matrix& R() const { return R_; }
  double delta() const { return delta_; }
  double log_det() const { return log_det_; }
  /// R = I with delta >= 1e6: sampled as independent uniforms.
  bool independent() const { return independent_; }
  /// Solves L x = v for the lower Cholesky factor L of R.
  Vector whiten(const Vector& v) const;
  const Matrix& cholesky() const { return chol_; }

 private:
  Matrix R_;
  Matrix chol_;
  double delta_ = kDeltaMax;
  double log_det_ = 0.0;
  bool independent_ = false;
};

/// log c(u | R, delta). u is clamped to [1e-12, 1 - 1e-12]. n = 1 gives 0.
double copula_logdensity(const TCopula& copula, std::span<const double> u,
                         CopulaDensity mode = CopulaDensity::Standard);

/// Same, from precomputed t-quantiles v_k = T_delta^{-1}(u_k).
double copula_logdensity_from_quantiles(const TCopula& copula, const Vector& v,
                                        CopulaDensity mode = CopulaDensity::Standard);

/// Kendall's tau matrix of the columns of U (L x n).
Matrix kendall_tau(const Matrix& U);

/// Nearest correlation matrix (alternating projections with Dykstra's
/// correction) with eigenvalues floored at `eig_floor`.
Matrix nearest_correlation(const Matrix& A, double eig_floor = 1e-8, int max_iterations = 200);

struct CopulaFitReport {
  bool projected = false;
  double shrinkage = 0.0;
  double loglik = kNegInf;
};

/// Two-stage fit from pseudo-observations U (L x n, entries in (0,1)):
/// R from tau inversion R_jk = sin(pi tau_jk / 2), then delta by
/// golden-section maximization of the copula likelihood on [2.5, 350].
TCopula fit_tcopula(const Matrix& U, CopulaFitReport* report = nullptr);

/// One draw u ~ C(R, delta).
Vector sample_tcopula(const TCopula& copula, Rng& rng);

}  // namespace auxdesign
