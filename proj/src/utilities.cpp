#include "auxdesign/utilities.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "auxdesign/format.hpp"
#include "auxdesign/parallel.hpp"

namespace auxdesign {

namespace {

constexpr double kExpClamp = 700.0;

struct Outer {
  Matrix theta;
  Matrix y;
};

std::span<const double> row_span(const Matrix& M, Eigen::Index i, std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(M.cols()));
  for (Eigen::Index k = 0; k < M.cols(); ++k) buf[static_cast<std::size_t>(k)] = M(i, k);
  return buf;
}

Outer draw_outer(const ModelPtr& model, const Prior& prior, const Design& D, std::size_t B,
                 std::uint64_t seed) {
  Outer o{Matrix(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(prior.dim())),
          Matrix(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(D.n()))};
  parallel_for(B, [&](std::size_t i) {
    Rng rng = make_rng(seed, "outer", i);
    const Vector theta = prior.sample(rng);
    const auto r = static_cast<Eigen::Index>(i);
    o.theta.row(r) = theta.transpose();
    for (std::size_t k = 0; k < D.n(); ++k)
      o.y(r, static_cast<Eigen::Index>(k)) = model->simulate(theta, D.row(k), rng);
  });
  return o;
}

void check_problem(const EstimationProblem& p, const Design& D, const EvalBudget& b) {
  if (!p.model) throw ConfigError("utility: no model");
  if (D.n() == 0 || D.w() != p.model->design_dim()) throw ConfigError("utility: design dimension mismatch");
  if (b.B == 0 || b.C == 0 || b.L == 0) throw ConfigError("utility: budgets must be positive");
}

void finalize(UtilityEvaluation& e) {
  const auto B = static_cast<double>(e.u.size());
  double sum = 0.0;
  e.nonfinite = 0;
  for (double v : e.u) {
    sum += v;
    e.nonfinite += !std::isfinite(v);
  }
  e.estimate = sum / B;
  if (e.u.size() > 1 && std::isfinite(e.estimate)) {
    double ss = 0.0;
    for (double v : e.u) ss += (v - e.estimate) * (v - e.estimate);
    e.se = std::sqrt(ss / (B - 1.0) / B);
  } else {
    e.se = 0.0;
  }
}

double exact_loglik(const Model& model, std::span<const double> y, const Vector& theta, const Design& D) {
  double total = 0.0;
  for (std::size_t k = 0; k < D.n(); ++k) {
    total += model.log_density(y[k], theta, D.row(k));
    if (total == kNegInf) break;
  }
  return total;
}

std::vector<Vector> inner_draws(const Prior& prior, std::size_t C, std::uint64_t seed) {
  Rng rng = make_rng(seed, "inner");
  return prior.sample(C, rng);
}

}  // namespace

UtilityKind utility_from_name(std::string_view name) {
  if (name == "SIG" || name == "sig") return UtilityKind::SIG;
  if (name == "LR" || name == "lr") return UtilityKind::LR;
  if (name == "SIG_MODELS" || name == "sig_models") return UtilityKind::SIG_MODELS;
  if (name == "ZERO_ONE" || name == "zero_one") return UtilityKind::ZERO_ONE;
  throw ConfigError("unknown utility '" + std::string(name) + "'");
}

std::string utility_name(UtilityKind kind) {
  switch (kind) {
    case UtilityKind::SIG: return "SIG";
    case UtilityKind::LR: return "LR";
    case UtilityKind::SIG_MODELS: return "SIG_MODELS";
    case UtilityKind::ZERO_ONE: return "ZERO_ONE";
  }
  return "?";
}

bool is_model_utility(UtilityKind kind) {
  return kind == UtilityKind::SIG_MODELS || kind == UtilityKind::ZERO_ONE;
}

double utility_value(UtilityKind kind, double c, double m) {
  switch (kind) {
    case UtilityKind::SIG:
    case UtilityKind::SIG_MODELS:
      return c - m;
    case UtilityKind::LR:
      return 1.0 - std::exp(std::min(0.5 * (m - c), kExpClamp));
    case UtilityKind::ZERO_ONE:
      break;
  }
  throw Error("utility_value: ZERO_ONE is not a likelihood-ratio utility");
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - mx);
  return mx + std::log(sum) - std::log(static_cast<double>(values.size()));
}

UtilityEvaluation expected_utility_aux(UtilityKind kind, const Design& D, const EstimationProblem& problem,
                                       const EvalBudget& budget) {
  if (is_model_utility(kind)) throw ConfigError("expected_utility_aux: model utilities need a model set");
  check_problem(problem, D, budget);
  if (!problem.cond || !problem.marg) throw ConfigError("expected_utility_aux: auxiliary models missing");
  const Stopwatch total;
  UtilityEvaluation e;

  const Stopwatch sim;
  Outer outer = draw_outer(problem.model, problem.prior, D, budget.B, budget.seed);
  e.timings.simulate = sim.seconds();

  const Stopwatch cop;
  TCopula copula;
  CopulaFitReport report;
  try {
    copula = fit_copula(*problem.marg, marginal_sampler(problem.model, problem.prior), D, budget.L,
                        derive_seed(budget.seed, "copula"), 0, &report);
  } catch (const FitError& err) {
    throw FitError(std::string("auxiliary MC: copula fit failed at n = ") + std::to_string(D.n()) +
                   " with L = " + std::to_string(budget.L) + ": " + err.what());
  }
  const auto params = marginal_params(*problem.marg, D);
  e.timings.copula = cop.seconds();

  const Stopwatch ut;
  e.u.resize(budget.B);
  e.loglik_cond.resize(budget.B);
  e.loglik_marg.resize(budget.B);
  parallel_for(budget.B, [&](std::size_t i) {
    std::vector<double> buf;
    const auto r = static_cast<Eigen::Index>(i);
    const auto y = row_span(outer.y, r, buf);
    const Vector theta = outer.theta.row(r).transpose();
    e.loglik_cond[i] = problem.cond->loglik(y, theta, D);
    e.loglik_marg[i] = aux_marginal_loglik(*problem.marg, params, copula, y, D, problem.density);
    e.u[i] = utility_value(kind, e.loglik_cond[i], e.loglik_marg[i]);
  });
  e.timings.utility = ut.seconds();
  e.draws = std::move(outer.theta);
  finalize(e);
  e.timings.total = total.seconds();
  return e;
}

UtilityEvaluation expected_utility_nested(UtilityKind kind, const Design& D, const EstimationProblem& problem,
                                          const EvalBudget& budget, const NestedOptions& options) {
  if (is_model_utility(kind)) throw ConfigError("expected_utility_nested: model utilities need a model set");
  check_problem(problem, D, budget);
  const bool exact = options.source == LikelihoodSource::Exact;
  if (exact && !problem.model->has_log_density())
    throw ConfigError("nested-exact evaluation refused: model '" + problem.model->key() +
                      "' has no tractable likelihood");
  if (!exact && !problem.cond) throw ConfigError("expected_utility_nested: conditional auxiliary model missing");
  const Stopwatch total;
  UtilityEvaluation e;
  const std::size_t n = D.n(), C = budget.C;

  const Stopwatch sim;
  Outer outer = draw_outer(problem.model, problem.prior, D, budget.B, budget.seed);
  const std::vector<Vector> inner = inner_draws(problem.prior, C, budget.seed);
  e.timings.simulate = sim.seconds();

  // Optional cache of phi_f(theta_j, d_k) over the shared inner sample.
  std::vector<AuxParams> cache;
  std::vector<long> trials(n);
  for (std::size_t k = 0; k < n; ++k) trials[k] = problem.model->trials(D.row(k));
  if (!exact && options.cache_inner) {
    cache.resize(C * n);
    parallel_for(C, [&](std::size_t j) {
      for (std::size_t k = 0; k < n; ++k) cache[j * n + k] = problem.cond->phi(inner[j], D.row(k));
    });
  }

  const auto loglik = [&](std::span<const double> y, const Vector& theta) {
    return exact ? exact_loglik(*problem.model, y, theta, D) : problem.cond->loglik(y, theta, D);
  };

  const Stopwatch ut;
  e.u.resize(budget.B);
  e.loglik_cond.resize(budget.B);
  e.loglik_marg.resize(budget.B);
  parallel_for(budget.B, [&](std::size_t i) {
    std::vector<double> buf, vals(C);
    const auto r = static_cast<Eigen::Index>(i);
    const auto y = row_span(outer.y, r, buf);
    for (std::size_t j = 0; j < C; ++j) {
      if (cache.empty()) {
        vals[j] = loglik(y, inner[j]);
      } else {
        double s = 0.0;
        for (std::size_t k = 0; k < n && s != kNegInf; ++k)
          s += problem.cond->family().log_density(cache[j * n + k].phi, y[k], trials[k]);
        vals[j] = s;
      }
    }
    e.loglik_cond[i] = loglik(y, outer.theta.row(r).transpose());
    e.loglik_marg[i] = log_mean_exp(vals);
    e.u[i] = utility_value(kind, e.loglik_cond[i], e.loglik_marg[i]);
  });
  e.timings.utility = ut.seconds();
  e.draws = std::move(outer.theta);
  finalize(e);
  e.timings.total = total.seconds();
  return e;
}

double nested_log_marginal(std::span<const double> y, const Design& D, const EstimationProblem& problem,
                           std::size_t C, std::uint64_t seed, LikelihoodSource source) {
  if (y.size() != D.n()) throw Error("nested_log_marginal: response and design sizes differ");
  const std::vector<Vector> inner = inner_draws(problem.prior, C, seed);
  std::vector<double> vals(C);
  parallel_for(C, [&](std::size_t j) {
    vals[j] = source == LikelihoodSource::Exact ? exact_loglik(*problem.model, y, inner[j], D)
                                                : problem.cond->loglik(y, inner[j], D);
  });
  return log_mean_exp(vals);
}

UtilityEvaluation expected_utility_models(UtilityKind kind, const Design& D, const ComparisonProblem& problem,
                                          const EvalBudget& budget) {
  if (!is_model_utility(kind)) throw ConfigError("expected_utility_models: needs SIG_MODELS or ZERO_ONE");
  problem.set.validate();
  if (!problem.marg) throw ConfigError("expected_utility_models: marginal auxiliary model missing");
  const std::size_t K = problem.set.size(), n = D.n();
  if (problem.marg->models() != K) throw ConfigError("expected_utility_models: auxiliary model count mismatch");
  if (n == 0 || D.w() != problem.set.space.w()) throw ConfigError("utility: design dimension mismatch");
  if (budget.B == 0 || budget.L == 0) throw ConfigError("utility: budgets must be positive");
  const Stopwatch total;
  UtilityEvaluation e;

  const Stopwatch cop;
  std::vector<TCopula> copulas(K);
  std::vector<std::vector<AuxParams>> params(K);
  for (std::size_t m = 0; m < K; ++m) {
    try {
      copulas[m] = fit_copula(*problem.marg, marginal_sampler(problem.set.models[m], problem.set.priors[m]), D,
                              budget.L, derive_seed(budget.seed, "copula", m), m);
    } catch (const FitError& err) {
      throw FitError("model utility: copula fit failed for model '" + problem.set.models[m]->key() +
                     "': " + err.what());
    }
    params[m] = marginal_params(*problem.marg, D, m);
  }
  e.timings.copula = cop.seconds();

  std::vector<double> log_prior(K);
  for (std::size_t m = 0; m < K; ++m) log_prior[m] = std::log(problem.set.prior_probs[m]);

  const Stopwatch ut;
  e.u.resize(budget.B);
  e.loglik_cond.resize(budget.B);
  e.loglik_marg.resize(budget.B);
  e.draws.resize(static_cast<Eigen::Index>(budget.B), 1);
  parallel_for(budget.B, [&](std::size_t i) {
    Rng rng = make_rng(budget.seed, "outer", i);
    std::discrete_distribution<std::size_t> pick(problem.set.prior_probs.begin(), problem.set.prior_probs.end());
    const std::size_t mi = pick(rng);
    const Vector theta = problem.set.priors[mi].sample(rng);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = problem.set.models[mi]->simulate(theta, D.row(k), rng);

    std::vector<double> joint(K);
    std::size_t best = 0;
    for (std::size_t m = 0; m < K; ++m) {
      joint[m] = aux_marginal_loglik(*problem.marg, params[m], copulas[m], y, D, problem.density) + log_prior[m];
      if (joint[m] > joint[best]) best = m;
    }
    const double mx = joint[best];
    double lse = mx;
    if (std::isfinite(mx)) {
      double s = 0.0;
      for (double v : joint) s += std::exp(v - mx);
      lse = mx + std::log(s);
    }
    e.draws(static_cast<Eigen::Index>(i), 0) = static_cast<double>(mi);
    e.loglik_cond[i] = joint[mi] - log_prior[mi];
    e.loglik_marg[i] = lse;
    e.u[i] = kind == UtilityKind::ZERO_ONE ? (best == mi ? 1.0 : 0.0) : e.loglik_cond[i] - lse;
  });
  e.timings.utility = ut.seconds();
  finalize(e);
  e.timings.total = total.seconds();
  return e;
}

std::vector<CostRow> cost_benchmark(const Design& D, const EstimationProblem& problem, std::size_t B,
                                    const std::vector<std::size_t>& inner_sizes, std::size_t L,
                                    std::uint64_t seed, const NestedOptions& options) {
  std::vector<CostRow> rows;
  for (std::size_t C : inner_sizes) {
    const EvalBudget budget{B, C, L, seed};
    CostRow row{B, C, 0.0, 0.0};
    {
      const Stopwatch sw;
      expected_utility_aux(UtilityKind::SIG, D, problem, budget);
      row.aux_seconds = sw.seconds();
    }
    {
      const Stopwatch sw;
      expected_utility_nested(UtilityKind::SIG, D, problem, budget, options);
      row.nested_seconds = sw.seconds();
    }
    rows.push_back(row);
  }
  return rows;
}

void write_evaluation_csv(std::ostream& out, const UtilityEvaluation& eval, bool by_model) {
  out << "i";
  if (by_model) {
    out << ",m";
  } else {
    for (Eigen::Index c = 0; c < eval.draws.cols(); ++c) out << ",theta_" << (c + 1);
  }
  out << ",loglik_cond,loglik_marg,u\n";
  for (std::size_t i = 0; i < eval.u.size(); ++i) {
    out << i;
    const auto r = static_cast<Eigen::Index>(i);
    if (by_model) {
      out << ',' << static_cast<long>(eval.draws(r, 0));
    } else {
      for (Eigen::Index c = 0; c < eval.draws.cols(); ++c) out << ',' << fmt17(eval.draws(r, c));
    }
    out << ',' << fmt17(eval.loglik_cond[i]) << ',' << fmt17(eval.loglik_marg[i]) << ',' << fmt17(eval.u[i])
        << '\n';
  }
}

std::string evaluation_summary_json(const UtilityEvaluation& eval, UtilityKind kind, bool with_timings) {
  nlohmann::ordered_json j;
  j["utility"] = utility_name(kind);
  j["B"] = eval.u.size();
  j["estimate"] = eval.estimate;
  j["se"] = eval.se;
  j["nonfinite"] = eval.nonfinite;
  if (with_timings) {
    j["timings"] = {{"simulate", eval.timings.simulate},
                    {"copula", eval.timings.copula},
                    {"utility", eval.timings.utility},
                    {"total", eval.timings.total}};
  }
  return j.dump(2);
}

}  // namespace auxdesign
