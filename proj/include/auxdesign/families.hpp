#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auxdesign/core.hpp"

namespace auxdesign {

enum class FamilyKind { Normal, Poisson, NegativeBinomial, BetaBinomial };
enum class Link { Identity, Log, Logit };

double apply_link(Link link, double phi);
double inverse_link(Link link, double z);

/// Auxiliary parameters on the natural scale (phi) and the link scale (z).
struct AuxParams {
  Vector phi;
  Vector z;
};

struct MleFit {
  AuxParams params;
  bool ok = false;
  double loglik = kNegInf;
  double start_loglik = kNegInf;
  std::string status;
};

/// Parametric family H_X(phi) used as an auxiliary model.
///
/// Parameterizations (natural scale, links):
///   Normal           (mean, variance)                    identity, log
///   Poisson          (mean)                              log
///   NegativeBinomial (mean mu, dispersion k), Var = mu + mu^2 / k   log, log
///   BetaBinomial     (mean prob p, overdispersion rho)   logit, logit
/// BetaBinomial takes the trial count as per-observation context; alpha =
/// p (1 - rho) / rho and beta = (1 - p)(1 - rho) / rho.
class AuxiliaryFamily {
 public:
  explicit AuxiliaryFamily(FamilyKind kind = FamilyKind::Normal);
  /// Accepts normal | poisson | negbin | betabinomial.
  static AuxiliaryFamily from_name(std::string_view name);

  FamilyKind kind() const { return kind_; }
  const std::string& name() const;
  std::size_t v() const { return links_.size(); }
  const std::vector<Link>& links() const { return links_; }
  bool discrete() const { return kind_ != FamilyKind::Normal; }

  Vector to_link(const Vector& phi) const;
  Vector from_link(const Vector& z) const;
  AuxParams from_phi(const Vector& phi) const { return {phi, to_link(phi)}; }
  AuxParams from_z(const Vector& z) const { return {from_link(z), z}; }
  bool valid(const Vector& phi) const;

  /// log pdf / pmf; -inf off the support. `trials` is the BetaBinomial size.
  double log_density(const Vector& phi, double y, long trials = 0) const;
  /// P(Y <= y); clamped to 0 / 1 off the support.
  double cdf(const Vector& phi, double y, long trials = 0) const;
  /// Generalized inverse: smallest y with cdf(y) >= u (discrete families).
  double quantile(const Vector& phi, double u, long trials = 0) const;
  double sample(const Vector& phi, long trials, Rng& rng) const;

  /// Maximum likelihood from an i.i.d. sample. `trials` is empty, a single
  /// shared trial count, or one per observation.
  MleFit fit_mle(std::span<const double> sample, std::span<const long> trials = {}) const;

 private:
  FamilyKind kind_;
  std::vector<Link> links_;
};

}  // namespace auxdesign
