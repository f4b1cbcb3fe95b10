#include "auxdesign/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "auxdesign/format.hpp"
#include "auxdesign/parallel.hpp"

namespace auxdesign {

namespace {

struct Summary {
  double mean, var, median;
};

Summary summarize(std::vector<double> v) {
  const auto n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  double med = v[h];
  if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
  return {m, v.size() > 1 ? ss / (n - 1.0) : 0.0, med};
}

void resize_stats(StatisticPairs& s, std::size_t M0) {
  for (auto* v : {&s.mean_model, &s.mean_aux, &s.var_model, &s.var_aux, &s.median_model, &s.median_aux})
    v->assign(M0, 0.0);
}

void store(StatisticPairs& s, std::size_t i, const std::vector<double>& model, const std::vector<double>& aux) {
  const Summary a = summarize(model), b = summarize(aux);
  s.mean_model[i] = a.mean;
  s.var_model[i] = a.var;
  s.median_model[i] = a.median;
  s.mean_aux[i] = b.mean;
  s.var_aux[i] = b.var;
  s.median_aux[i] = b.median;
}

DesignPoint uniform_point(const DesignSpace& space, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DesignPoint d(space.w());
  for (std::size_t c = 0; c < space.w(); ++c) d[c] = space.bound(c).lo + space.bound(c).width() * unif(rng);
  return d;
}

std::size_t pick_model(const std::vector<double>& probs, Rng& rng) {
  if (probs.size() <= 1) return 0;
  std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
  return pick(rng);
}

AdequacyReport marginal_impl(const MarginalAux& marg, const std::vector<ModelPtr>& models,
                             const std::vector<Prior>& priors, const std::vector<double>& probs,
                             const DesignSpace& space, std::size_t M0, std::size_t N, std::uint64_t seed) {
  if (M0 == 0 || N == 0) throw ConfigError("assess_marginal: M0 and N must be positive");
  AdequacyReport rep;
  rep.kind = "marginal";
  rep.M0 = M0;
  rep.N = N;
  resize_stats(rep.stats, M0);
  rep.loglik_model.assign(M0, 0.0);
  rep.loglik_aux.assign(M0, 0.0);
  const AuxiliaryFamily& fam = marg.family();
  parallel_for(M0, [&](std::size_t i) {
    Rng rng = make_rng(seed, "marg-test", i);
    const std::size_t m = pick_model(probs, rng);
    const DesignPoint d = uniform_point(space, rng);
    const AuxParams phi = marg.phi(d, m);
    const long trials = marg.trials(d);
    std::vector<double> ym(N), ya(N);
    for (auto& y : ym) y = models[m]->simulate(priors[m].sample(rng), d, rng);
    for (auto& y : ya) y = fam.sample(phi.phi, trials, rng);
    double lm = 0.0, la = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      lm += fam.log_density(phi.phi, ym[j], trials);
      la += fam.log_density(phi.phi, ya[j], trials);
    }
    rep.loglik_model[i] = lm;
    rep.loglik_aux[i] = la;
    store(rep.stats, i, ym, ya);
  });
  rep.p_value = predictive_pvalue(rep.loglik_model, rep.loglik_aux, Direction::Less, fam.discrete());
  return rep;
}

AdequacyReport coupled_impl(const MarginalAux& marg, const std::vector<ModelPtr>& models,
                            const std::vector<Prior>& priors, const std::vector<double>& probs,
                            const DesignSpace& space, std::size_t M0, std::size_t L, std::size_t n,
                            std::uint64_t seed) {
  if (M0 == 0 || n == 0) throw ConfigError("assess_coupled: M0 and n must be positive");
  AdequacyReport rep;
  rep.kind = "coupled";
  rep.M0 = M0;
  rep.N = n;
  resize_stats(rep.stats, M0);
  rep.loglik_model.assign(M0, 0.0);
  rep.loglik_aux.assign(M0, 0.0);
  parallel_for(M0, [&](std::size_t i) {
    Rng rng = make_rng(seed, "coupled-test", i);
    const std::size_t m = pick_model(probs, rng);
    Design D(n, space.w());
    for (std::size_t k = 0; k < n; ++k) {
      const DesignPoint d = uniform_point(space, rng);
      std::copy(d.begin(), d.end(), D.row(k).begin());
    }
    const std::vector<double> y = marginal_sampler(models[m], priors[m])(D, rng);
    const std::vector<double> yx =
        sample_coupled(marg, models[m], priors[m], D, L, derive_seed(seed, "coupled-draw", i), m);
    const TCopula cop = fit_copula(marg, marginal_sampler(models[m], priors[m]), D, L,
                                   derive_seed(seed, "coupled-eval", i), m);
    const auto params = marginal_params(marg, D, m);
    rep.loglik_model[i] = aux_marginal_loglik(marg, params, cop, y, D);
    rep.loglik_aux[i] = aux_marginal_loglik(marg, params, cop, yx, D);
    store(rep.stats, i, y, yx);
  });
  rep.p_value = predictive_pvalue(rep.loglik_model, rep.loglik_aux, Direction::Greater, marg.family().discrete());
  return rep;
}

}  // namespace

double predictive_pvalue(std::span<const double> a, std::span<const double> b, Direction dir, bool half_ties) {
  if (a.size() != b.size() || a.empty()) throw Error("predictive_pvalue: samples must have equal positive size");
  double count = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) {
      if (half_ties) count += 0.5;
    } else if (dir == Direction::Less ? a[i] < b[i] : a[i] > b[i]) {
      count += 1.0;
    }
  }
  return count / static_cast<double>(a.size());
}

double slope_through_origin(std::span<const double> x, std::span<const double> y) {
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  return sxy / sxx;
}

AdequacyReport assess_conditional(const ConditionalAux& cond, const Prior& prior, const DesignSpace& space,
                                  std::size_t M0, std::size_t N, std::uint64_t seed) {
  if (M0 == 0 || N == 0) throw ConfigError("assess_conditional: M0 and N must be positive");
  AdequacyReport rep;
  rep.kind = "conditional";
  rep.M0 = M0;
  rep.N = N;
  resize_stats(rep.stats, M0);
  rep.loglik_model.assign(M0, 0.0);
  rep.loglik_aux.assign(M0, 0.0);
  const AuxiliaryFamily& fam = cond.family();
  const Model& model = cond.model();
  parallel_for(M0, [&](std::size_t i) {
    Rng rng = make_rng(seed, "cond-test", i);
    const Vector theta = prior.sample(rng);
    const DesignPoint d = uniform_point(space, rng);
    const AuxParams phi = cond.phi(theta, d);
    const long trials = model.trials(d);
    std::vector<double> ym(N), ya(N);
    for (auto& y : ym) y = model.simulate(theta, d, rng);
    for (auto& y : ya) y = fam.sample(phi.phi, trials, rng);
    double lm = 0.0, la = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      lm += fam.log_density(phi.phi, ym[j], trials);
      la += fam.log_density(phi.phi, ya[j], trials);
    }
    rep.loglik_model[i] = lm;
    rep.loglik_aux[i] = la;
    store(rep.stats, i, ym, ya);
  });
  rep.p_value = predictive_pvalue(rep.loglik_model, rep.loglik_aux, Direction::Less, fam.discrete());
  return rep;
}

AdequacyReport assess_marginal(const MarginalAux& marg, ModelPtr model, const Prior& prior,
                               const DesignSpace& space, std::size_t M0, std::size_t N, std::uint64_t seed) {
  return marginal_impl(marg, {std::move(model)}, {prior}, {1.0}, space, M0, N, seed);
}

AdequacyReport assess_marginal(const MarginalAux& marg, const ModelSet& set, std::size_t M0, std::size_t N,
                               std::uint64_t seed) {
  set.validate();
  return marginal_impl(marg, set.models, set.priors, set.prior_probs, set.space, M0, N, seed);
}

AdequacyReport assess_coupled(const MarginalAux& marg, ModelPtr model, const Prior& prior,
                              const DesignSpace& space, std::size_t M0, std::size_t L, std::size_t n,
                              std::uint64_t seed) {
  return coupled_impl(marg, {std::move(model)}, {prior}, {1.0}, space, M0, L, n, seed);
}

AdequacyReport assess_coupled(const MarginalAux& marg, const ModelSet& set, std::size_t M0, std::size_t L,
                              std::size_t n, std::uint64_t seed) {
  set.validate();
  return coupled_impl(marg, set.models, set.priors, set.prior_probs, set.space, M0, L, n, seed);
}

void write_adequacy_csv(std::ostream& out, const AdequacyReport& r) {
  out << "i,mean_model,mean_aux,var_model,var_aux,median_model,median_aux,loglik_model,loglik_aux\n";
  for (std::size_t i = 0; i < r.M0; ++i) {
    out << i << ',' << fmt17(r.stats.mean_model[i]) << ',' << fmt17(r.stats.mean_aux[i]) << ','
        << fmt17(r.stats.var_model[i]) << ',' << fmt17(r.stats.var_aux[i]) << ',' << fmt17(r.stats.median_model[i])
        << ',' << fmt17(r.stats.median_aux[i]) << ',' << fmt17(r.loglik_model[i]) << ','
        << fmt17(r.loglik_aux[i]) << '\n';
  }
}

std::string adequacy_summary_json(const AdequacyReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  j["p_value"] = r.p_value;
  j["adequate"] = r.adequate();
  j["gate"] = {kGateLow, kGateHigh};
  j["M0"] = r.M0;
  j[r.kind == "coupled" ? "n" : "N"] = r.N;
  j["mean_slope"] = slope_through_origin(r.stats.mean_model, r.stats.mean_aux);
  return j.dump(2);
}

}  // namespace auxdesign
