#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "auxdesign/coupled.hpp"

namespace auxdesign {

inline constexpr double kGateLow = 0.01;
inline constexpr double kGateHigh = 0.99;

/// Per test sample statistics of the assumed-model and auxiliary-model samples.
struct StatisticPairs {
  std::vector<double> mean_model, mean_aux;
  std::vector<double> var_model, var_aux;
  std::vector<double> median_model, median_aux;
};

struct AdequacyReport {
  std::string kind;
  double p_value = 0.0;
  StatisticPairs stats;
  /// The compared log-likelihoods per test sample (assumed sample, auxiliary sample).
  std::vector<double> loglik_model, loglik_aux;
  std::size_t M0 = 0;
  std::size_t N = 0;

  bool adequate() const { return p_value > kGateLow && p_value < kGateHigh; }
};

enum class Direction { Less, Greater };

/// (1/M0) sum_i I(a_i < b_i) (or >), ties counted as 1/2 when `half_ties`.
double predictive_pvalue(std::span<const double> a, std::span<const double> b, Direction dir, bool half_ties);

/// Least-squares slope through the origin of y on x.
double slope_through_origin(std::span<const double> x, std::span<const double> y);

/// Conditional check: theta from the prior, d uniform, N draws from the model
/// and from h_X at phi_f(theta, d); statistic sum_j log h_X, p-value with `<`.
AdequacyReport assess_conditional(const ConditionalAux& cond, const Prior& prior, const DesignSpace& space,
                                  std::size_t M0, std::size_t N, std::uint64_t seed);

/// Marginal check: as above with theta redrawn per model draw.
AdequacyReport assess_marginal(const MarginalAux& marg, ModelPtr model, const Prior& prior,
                               const DesignSpace& space, std::size_t M0, std::size_t N, std::uint64_t seed);
/// Model-set variant: m drawn from the prior model probabilities per test sample.
AdequacyReport assess_marginal(const MarginalAux& marg, const ModelSet& set, std::size_t M0, std::size_t N,
                               std::uint64_t seed);

/// Coupled check at n runs: M0 marginal-model vectors against M0 coupled-model
/// vectors, compared by the coupled log-likelihood with `>`.
AdequacyReport assess_coupled(const MarginalAux& marg, ModelPtr model, const Prior& prior,
                              const DesignSpace& space, std::size_t M0, std::size_t L, std::size_t n,
                              std::uint64_t seed);
AdequacyReport assess_coupled(const MarginalAux& marg, const ModelSet& set, std::size_t M0, std::size_t L,
                              std::size_t n, std::uint64_t seed);

/// Columns: i, mean_model, mean_aux, var_model, var_aux, median_model, median_aux, loglik_model, loglik_aux.
void write_adequacy_csv(std::ostream& out, const AdequacyReport& report);
std::string adequacy_summary_json(const AdequacyReport& report);

}  // namespace auxdesign
