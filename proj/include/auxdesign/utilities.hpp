#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "auxdesign/coupled.hpp"

namespace auxdesign {

enum class UtilityKind { SIG, LR, SIG_MODELS, ZERO_ONE };

UtilityKind utility_from_name(std::string_view name);
std::string utility_name(UtilityKind kind);
bool is_model_utility(UtilityKind kind);

struct EvalBudget {
  std::size_t B = 1000;
  std::size_t C = 1000;
  std::size_t L = 500;
  std::uint64_t seed = 0;
};

struct EvalTimings {
  double simulate = 0.0;
  double copula = 0.0;
  double utility = 0.0;
  double total = 0.0;
};

struct UtilityEvaluation {
  double estimate = 0.0;
  /// Standard error of the mean of the per-sample utilities.
  double se = 0.0;
  std::vector<double> u;
  std::vector<double> loglik_cond;
  std::vector<double> loglik_marg;
  /// Outer parameter draws (rows), or the drawn model index in column 0.
  Matrix draws;
  std::size_t nonfinite = 0;
  EvalTimings timings;
};

/// Everything needed for parameter-estimation utilities at any design.
struct EstimationProblem {
  ModelPtr model;
  Prior prior;
  DesignSpace space;
  std::shared_ptr<const ConditionalAux> cond;
  std::shared_ptr<const MarginalAux> marg;
  CopulaDensity density = CopulaDensity::Standard;
};

/// Competing models sharing one model-indexed marginal auxiliary model.
struct ComparisonProblem {
  ModelSet set;
  std::shared_ptr<const MarginalAux> marg;
  CopulaDensity density = CopulaDensity::Standard;
};

/// SIG: c - m. LR: 1 - exp((m - c) / 2) with the exponent clamped at 700.
double utility_value(UtilityKind kind, double loglik_cond, double loglik_marg);

/// Auxiliary Monte Carlo: B joint draws, copula fitted from L marginal draws,
/// auxiliary conditional and coupled marginal likelihoods per draw.
UtilityEvaluation expected_utility_aux(UtilityKind kind, const Design& D, const EstimationProblem& problem,
                                       const EvalBudget& budget);

enum class LikelihoodSource { Aux, Exact };

struct NestedOptions {
  LikelihoodSource source = LikelihoodSource::Aux;
  /// Precompute phi_f(theta_j, d_k) once per inner draw instead of once per (i, j, k).
  bool cache_inner = false;
};

/// log (1/C) sum_j exp(l_j) with log-sum-exp stabilization.
double log_mean_exp(std::span<const double> values);

/// Nested Monte Carlo with a shared inner prior sample of size C.
UtilityEvaluation expected_utility_nested(UtilityKind kind, const Design& D, const EstimationProblem& problem,
                                          const EvalBudget& budget, const NestedOptions& options = {});

/// Inner-MC log marginal likelihood of one response vector.
double nested_log_marginal(std::span<const double> y, const Design& D, const EstimationProblem& problem,
                           std::size_t C, std::uint64_t seed, LikelihoodSource source);

/// Model-comparison utilities with a separate copula per model.
UtilityEvaluation expected_utility_models(UtilityKind kind, const Design& D, const ComparisonProblem& problem,
                                          const EvalBudget& budget);

struct CostRow {
  std::size_t B = 0;
  std::size_t C = 0;
  double aux_seconds = 0.0;
  double nested_seconds = 0.0;
  double ratio() const { return nested_seconds / aux_seconds; }
};

/// Wall time of one auxiliary-MC and one nested-MC (auxiliary likelihood)
/// evaluation at each inner size.
std::vector<CostRow> cost_benchmark(const Design& D, const EstimationProblem& problem, std::size_t B,
                                    const std::vector<std::size_t>& inner_sizes, std::size_t L,
                                    std::uint64_t seed, const NestedOptions& options = {});

/// Columns: i, theta_1..theta_p (or m), loglik_cond, loglik_marg, u.
void write_evaluation_csv(std::ostream& out, const UtilityEvaluation& eval, bool by_model = false);
std::string evaluation_summary_json(const UtilityEvaluation& eval, UtilityKind kind, bool with_timings = true);

}  // namespace auxdesign
