#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auxdesign/core.hpp"
#include "auxdesign/families.hpp"

namespace auxdesign {

enum class KernelKind { SE, SEE };

/// SE: exp(-sum_l rho_l (x_il - x_jl)^2).
/// SEE: the last input coordinate is a category label m; its weight rho_s
/// multiplies 1[m_i != m_j] instead of a squared distance.
struct Kernel {
  KernelKind kind = KernelKind::SE;
  Vector rho;
  double eta = 1e-4;
};

/// Correlation between two (already standardized) inputs; no nugget.
double kernel_eval(const Kernel& kernel, std::span<const double> xi, std::span<const double> xj);

struct MgpOptions {
  KernelKind kind = KernelKind::SE;
  /// Per-coordinate affine map x -> (x - lo) / (hi - lo) applied before the
  /// kernel. Empty means identity. Ignored for the SEE category column.
  Vector input_lo, input_hi;
  /// Pin hyperparameters instead of maximizing the profile likelihood.
  std::optional<Vector> fixed_rho;
  std::optional<double> fixed_eta;
  int multistarts = 10;
  std::uint64_t seed = 0;
  double log_rho_min = -10.0, log_rho_max = 10.0;
  double eta_min = 1e-8, eta_max = 1.0;
};

struct MgpPrediction {
  Vector mean;
  double scale = 0.0;
  Matrix row_cov;
};

/// Matrix-normal GP emulator: Z (v x M) ~ MN(beta 1', Sigma, A(rho, eta)).
class MgpFit {
 public:
  MgpFit() = default;

  /// X is M x s (raw inputs, one row per training point), Z is M x v.
  /// Throws FitError when M < s + 2 or no hyperparameter candidate factorizes.
  static MgpFit fit(const Matrix& X, const Matrix& Z, const MgpOptions& options = {});

  /// Rebuilds the fit at fixed hyperparameters (used by load and by fit).
  static MgpFit assemble(const Matrix& X, const Matrix& Z, const Kernel& kernel,
                         const Vector& input_lo, const Vector& input_hi);

  MgpPrediction predict(std::span<const double> x) const;
  Vector predict_mean(std::span<const double> x) const;
  /// Inverse link of the predictive mean.
  AuxParams predict_phi(std::span<const double> x, const AuxiliaryFamily& family) const;

  /// Profile log-likelihood -(M/2) log|Sigma| - (v/2) log|A| (constants dropped).
  static double profile_loglik(const Matrix& Xs, const Matrix& Z, const Kernel& kernel);
  double profile_loglik() const { return loglik_; }

  std::size_t input_dim() const { return static_cast<std::size_t>(X_.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(Z_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }
  const Kernel& kernel() const { return kernel_; }
  const Vector& beta() const { return beta_; }
  const Matrix& sigma() const { return sigma_; }
  const Matrix& inputs() const { return X_; }
  const Matrix& outputs() const { return Z_; }
  const Vector& input_lo() const { return lo_; }
  const Vector& input_hi() const { return hi_; }

  /// Free-form header fields written by save (model key, family, M, N, seed).
  std::map<std::string, std::string> meta;

  void save(std::ostream& out) const;
  static MgpFit load(std::istream& in);
  void save(const std::string& path) const;
  static MgpFit load(const std::string& path);

 private:
  Vector standardize(std::span<const double> x) const;

  Matrix X_, Xs_, Z_;
  Vector lo_, hi_;
  Kernel kernel_;
  Vector beta_;
  Matrix sigma_;
  Eigen::LLT<Matrix> chol_;
  Matrix weights_;  // A^{-1} (Z - 1 beta')
  double loglik_ = kNegInf;
};

}  // namespace auxdesign
