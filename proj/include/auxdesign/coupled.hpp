#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "auxdesign/copula.hpp"
#include "auxdesign/design_space.hpp"
#include "auxdesign/families.hpp"
#include "auxdesign/mgp.hpp"
#include "auxdesign/models.hpp"
#include "auxdesign/prior.hpp"

namespace auxdesign {

struct AuxBuildOptions {
  std::size_t M = 500;
  std::size_t N = 10000;
  std::uint64_t seed = 0;
  /// Abort when more than this fraction of per-row MLE fits fail.
  double max_failure_rate = 0.2;
  int mgp_multistarts = 10;
};

struct AuxBuildStats {
  std::size_t rows = 0;
  std::size_t failed = 0;
  double failure_rate() const { return rows ? static_cast<double>(failed) / rows : 0.0; }
};

/// Training inputs d^(1..M) shared by the conditional and marginal builds.
std::vector<DesignPoint> training_designs(const DesignSpace& space, std::size_t M, std::uint64_t seed);

/// F_X(theta, d) = H_X(phi_f(theta, d)) with phi_f emulated over x = (theta, d).
class ConditionalAux {
 public:
  ConditionalAux() = default;
  ConditionalAux(AuxiliaryFamily family, MgpFit emulator, ModelPtr model);

  const AuxiliaryFamily& family() const { return family_; }
  const MgpFit& emulator() const { return emulator_; }
  const Model& model() const { return *model_; }

  AuxParams phi(const Vector& theta, std::span<const double> d) const;
  double log_density(double y, const Vector& theta, std::span<const double> d) const;
  /// sum_k log f_X(y_k | phi_f(theta, d_k)); -inf if any y_k is off the support.
  double loglik(std::span<const double> y, const Vector& theta, const Design& D) const;

  AuxBuildStats stats;

  void save(const std::string& path) const;
  static ConditionalAux load(const std::string& path, ModelPtr model);

 private:
  AuxiliaryFamily family_;
  MgpFit emulator_;
  ModelPtr model_;
};

/// G_X(d) = H_X(phi_g(d)), or G_X(m, d) over competing models with the
/// category m appended as the last emulator input (SEE kernel).
class MarginalAux {
 public:
  MarginalAux() = default;
  MarginalAux(AuxiliaryFamily family, MgpFit emulator, ModelPtr trials_model, std::size_t models);

  const AuxiliaryFamily& family() const { return family_; }
  const MgpFit& emulator() const { return emulator_; }
  std::size_t models() const { return models_; }
  bool by_model() const { return models_ > 1; }
  long trials(std::span<const double> d) const { return trials_model_->trials(d); }

  AuxParams phi(std::span<const double> d, std::size_t m = 0) const;
  double log_density(double y, std::span<const double> d, std::size_t m = 0) const;
  double cdf(double y, std::span<const double> d, std::size_t m = 0) const;
  double quantile(double u, std::span<const double> d, std::size_t m = 0) const;
  /// Mid-PIT G(y-1) + g(y)/2 for discrete families, G(y) otherwise.
  double pit_mid(double y, const AuxParams& phi, long trials) const;
  /// Randomized PIT G(y-1) + V g(y) for discrete families, G(y) otherwise.
  double pit_random(double y, const AuxParams& phi, long trials, Rng& rng) const;

  AuxBuildStats stats;

  void save(const std::string& path) const;
  static MarginalAux load(const std::string& path, ModelPtr trials_model);

 private:
  std::vector<double> input(std::span<const double> d, std::size_t m) const;

  AuxiliaryFamily family_;
  MgpFit emulator_;
  ModelPtr trials_model_;
  std::size_t models_ = 1;
};

ConditionalAux build_conditional(ModelPtr model, const Prior& prior, const DesignSpace& space,
                                 const AuxiliaryFamily& family, const AuxBuildOptions& options);
MarginalAux build_marginal(ModelPtr model, const Prior& prior, const DesignSpace& space,
                           const AuxiliaryFamily& family, const AuxBuildOptions& options);
/// Model-indexed marginal: m^(i) drawn from the prior model probabilities per
/// training row, SEE kernel over (d, m).
MarginalAux build_marginal(const ModelSet& set, const AuxiliaryFamily& family,
                           const AuxBuildOptions& options);

/// Generator for one response vector at a design (used for copula training).
using VectorSampler = std::function<std::vector<double>(const Design&, Rng&)>;

/// Marginal draw: theta ~ prior then y_k ~ F(theta, d_k) for every run.
VectorSampler marginal_sampler(ModelPtr model, const Prior& prior);
/// Conditional draw at a fixed theta.
VectorSampler fixed_theta_sampler(ModelPtr model, Vector theta);

/// Simulates L vectors at D, maps them through the marginal auxiliary cdfs
/// with randomized PIT and fits the t-copula.
TCopula fit_copula(const MarginalAux& marg, const VectorSampler& sampler, const Design& D,
                   std::size_t L, std::uint64_t seed, std::size_t m = 0,
                   CopulaFitReport* report = nullptr);

/// Per-run marginal parameters phi_g(d_k) (or phi_g(m, d_k)) for a design.
std::vector<AuxParams> marginal_params(const MarginalAux& marg, const Design& D, std::size_t m = 0);

/// log c(G_X(y_1|d_1), ..., G_X(y_n|d_n)) + sum_k log g_X(y_k|d_k), mid-PIT.
double aux_marginal_loglik(const MarginalAux& marg, const std::vector<AuxParams>& params,
                           const TCopula& copula, std::span<const double> y, const Design& D,
                           CopulaDensity mode = CopulaDensity::Standard);
double aux_marginal_loglik(const MarginalAux& marg, const TCopula& copula, std::span<const double> y,
                           const Design& D, std::size_t m = 0,
                           CopulaDensity mode = CopulaDensity::Standard);

/// One draw from the coupled auxiliary model at D: theta ~ prior, copula
/// refit from L conditional vectors at that theta, u ~ copula, y_k = G_X^{-1}(u_k).
std::vector<double> sample_coupled(const MarginalAux& marg, ModelPtr model, const Prior& prior,
                                   const Design& D, std::size_t L, std::uint64_t seed,
                                   std::size_t m = 0);

}  // namespace auxdesign
