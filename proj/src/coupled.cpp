#include "auxdesign/coupled.hpp"

#include <algorithm>
#include <cmath>

#include "auxdesign/parallel.hpp"

namespace auxdesign {

namespace {

struct RowFit {
  bool ok = false;
  Vector z;
};

// Per-row MLE over N draws; rows that fail are dropped before the MGP fit.
template <class Draw>
std::vector<RowFit> fit_rows(std::size_t M, std::size_t N, const AuxiliaryFamily& family,
                             const std::vector<DesignPoint>& designs, const Model& trials_model,
                             std::uint64_t seed, std::string_view label, Draw draw) {
  std::vector<RowFit> rows(M);
  parallel_for(M, [&](std::size_t i) {
    Rng rng = make_rng(seed, label, i);
    std::vector<double> y(N);
    draw(i, y, rng);
    const long trials = trials_model.trials(designs[i]);
    const std::vector<long> t{trials};
    const MleFit fit = family.fit_mle(y, trials > 0 ? std::span<const long>(t) : std::span<const long>());
    if (fit.ok && fit.params.z.allFinite()) rows[i] = {true, fit.params.z};
  });
  return rows;
}

void check_failures(std::size_t failed, std::size_t rows, double limit, const std::string& what) {
  if (static_cast<double>(failed) > limit * static_cast<double>(rows))
    throw FitError(what + ": " + std::to_string(failed) + " of " + std::to_string(rows) +
                   " auxiliary fits failed; the auxiliary family is likely inadequate");
}

// Keeps successful rows; returns (X, Z).
std::pair<Matrix, Matrix> stack(const std::vector<RowFit>& rows,
                                const std::function<void(std::size_t, double*)>& input,
                                std::size_t s, std::size_t v) {
  std::size_t ok = 0;
  for (const auto& r : rows) ok += r.ok;
  Matrix X(static_cast<Eigen::Index>(ok), static_cast<Eigen::Index>(s));
  Matrix Z(static_cast<Eigen::Index>(ok), static_cast<Eigen::Index>(v));
  std::vector<double> buf(s);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].ok) continue;
    input(i, buf.data());
    for (std::size_t l = 0; l < s; ++l) X(r, static_cast<Eigen::Index>(l)) = buf[l];
    Z.row(r) = rows[i].z.transpose();
    ++r;
  }
  return {X, Z};
}

void set_meta(MgpFit& fit, const std::string& role, const std::string& model,
              const AuxiliaryFamily& family, const AuxBuildOptions& o, const AuxBuildStats& stats) {
  fit.meta["role"] = role;
  fit.meta["model"] = model;
  fit.meta["family"] = family.name();
  fit.meta["M"] = std::to_string(o.M);
  fit.meta["N"] = std::to_string(o.N);
  fit.meta["seed"] = std::to_string(o.seed);
  fit.meta["failed"] = std::to_string(stats.failed);
}

AuxBuildStats stats_from_meta(const MgpFit& fit) {
  AuxBuildStats s;
  const auto m = fit.meta.find("M");
  const auto f = fit.meta.find("failed");
  if (m != fit.meta.end()) s.rows = std::stoul(m->second);
  if (f != fit.meta.end()) s.failed = std::stoul(f->second);
  return s;
}

}  // namespace

std::vector<DesignPoint> training_designs(const DesignSpace& space, std::size_t M, std::uint64_t seed) {
  return latin_hypercube(space, M, derive_seed(seed, "train-design"));
}

ConditionalAux::ConditionalAux(AuxiliaryFamily family, MgpFit emulator, ModelPtr model)
    : family_(std::move(family)), emulator_(std::move(emulator)), model_(std::move(model)) {
  if (emulator_.output_dim() != family_.v()) throw Error("conditional aux: emulator output dimension mismatch");
  if (emulator_.input_dim() != model_->param_dim() + model_->design_dim())
    throw Error("conditional aux: emulator input dimension must be p + w");
}

AuxParams ConditionalAux::phi(const Vector& theta, std::span<const double> d) const {
  std::array<double, 16> x{};
  const std::size_t p = static_cast<std::size_t>(theta.size());
  for (std::size_t i = 0; i < p; ++i) x[i] = theta[static_cast<Eigen::Index>(i)];
  std::copy(d.begin(), d.end(), x.begin() + static_cast<std::ptrdiff_t>(p));
  return emulator_.predict_phi(std::span<const double>(x.data(), p + d.size()), family_);
}

double ConditionalAux::log_density(double y, const Vector& theta, std::span<const double> d) const {
  return family_.log_density(phi(theta, d).phi, y, model_->trials(d));
}

double ConditionalAux::loglik(std::span<const double> y, const Vector& theta, const Design& D) const {
  if (y.size() != D.n()) throw Error("aux_loglik: response and design sizes differ");
  double total = 0.0;
  for (std::size_t k = 0; k < D.n(); ++k) {
    total += log_density(y[k], theta, D.row(k));
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

void ConditionalAux::save(const std::string& path) const { emulator_.save(path); }

ConditionalAux ConditionalAux::load(const std::string& path, ModelPtr model) {
  MgpFit fit = MgpFit::load(path);
  const auto fam = AuxiliaryFamily::from_name(fit.meta.at("family"));
  ConditionalAux aux(fam, std::move(fit), std::move(model));
  aux.stats = stats_from_meta(aux.emulator());
  return aux;
}

MarginalAux::MarginalAux(AuxiliaryFamily family, MgpFit emulator, ModelPtr trials_model,
                         std::size_t models)
    : family_(std::move(family)),
      emulator_(std::move(emulator)),
      trials_model_(std::move(trials_model)),
      models_(models) {
  if (emulator_.output_dim() != family_.v()) throw Error("marginal aux: emulator output dimension mismatch");
  const std::size_t expect = trials_model_->design_dim() + (models_ > 1 ? 1 : 0);
  if (emulator_.input_dim() != expect) throw Error("marginal aux: emulator input dimension mismatch");
}

std::vector<double> MarginalAux::input(std::span<const double> d, std::size_t m) const {
  std::vector<double> x(d.begin(), d.end());
  if (models_ > 1) {
    if (m >= models_) throw Error("marginal aux: model index out of range");
    x.push_back(static_cast<double>(m));
  }
  return x;
}

AuxParams MarginalAux::phi(std::span<const double> d, std::size_t m) const {
  return emulator_.predict_phi(input(d, m), family_);
}

double MarginalAux::log_density(double y, std::span<const double> d, std::size_t m) const {
  return family_.log_density(phi(d, m).phi, y, trials(d));
}

double MarginalAux::cdf(double y, std::span<const double> d, std::size_t m) const {
  return family_.cdf(phi(d, m).phi, y, trials(d));
}

double MarginalAux::quantile(double u, std::span<const double> d, std::size_t m) const {
  return family_.quantile(phi(d, m).phi, u, trials(d));
}

double MarginalAux::pit_mid(double y, const AuxParams& phi, long trials) const {
  if (!family_.discrete()) return family_.cdf(phi.phi, y, trials);
  return family_.cdf(phi.phi, y - 1.0, trials) + 0.5 * std::exp(family_.log_density(phi.phi, y, trials));
}

double MarginalAux::pit_random(double y, const AuxParams& phi, long trials, Rng& rng) const {
  if (!family_.discrete()) return family_.cdf(phi.phi, y, trials);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double v = unif(rng);
  return family_.cdf(phi.phi, y - 1.0, trials) + v * std::exp(family_.log_density(phi.phi, y, trials));
}

void MarginalAux::save(const std::string& path) const {
  MgpFit copy = emulator_;
  copy.meta["models"] = std::to_string(models_);
  copy.save(path);
}

MarginalAux MarginalAux::load(const std::string& path, ModelPtr trials_model) {
  MgpFit fit = MgpFit::load(path);
  const auto fam = AuxiliaryFamily::from_name(fit.meta.at("family"));
  const auto it = fit.meta.find("models");
  const std::size_t models = it == fit.meta.end() ? 1 : std::stoul(it->second);
  MarginalAux aux(fam, std::move(fit), std::move(trials_model), models);
  aux.stats = stats_from_meta(aux.emulator());
  return aux;
}

ConditionalAux build_conditional(ModelPtr model, const Prior& prior, const DesignSpace& space,
                                 const AuxiliaryFamily& family, const AuxBuildOptions& o) {
  const std::size_t p = model->param_dim(), w = model->design_dim(), s = p + w;
  if (o.M < s + 2) throw FitError("build_conditional: M must be at least p + w + 2");
  const auto designs = training_designs(space, o.M, o.seed);
  std::vector<Vector> thetas(o.M);
  const auto rows = fit_rows(o.M, o.N, family, designs, *model, o.seed, "cond-row",
                             [&](std::size_t i, std::vector<double>& y, Rng& rng) {
                               thetas[i] = prior.sample(rng);
                               for (auto& v : y) v = model->simulate(thetas[i], designs[i], rng);
                             });
  AuxBuildStats stats{o.M, 0};
  for (const auto& r : rows) stats.failed += !r.ok;
  check_failures(stats.failed, o.M, o.max_failure_rate, "build_conditional");

  auto [X, Z] = stack(rows, [&](std::size_t i, double* x) {
    for (std::size_t l = 0; l < p; ++l) x[l] = thetas[i][static_cast<Eigen::Index>(l)];
    for (std::size_t l = 0; l < w; ++l) x[p + l] = designs[i][l];
  }, s, family.v());
  MgpOptions mo;
  mo.seed = derive_seed(o.seed, "cond-mgp");
  mo.multistarts = o.mgp_multistarts;
  mo.input_lo.resize(static_cast<Eigen::Index>(s));
  mo.input_hi.resize(static_cast<Eigen::Index>(s));
  for (std::size_t l = 0; l < p; ++l) {
    const Interval r = prior.marginal_range(l);
    mo.input_lo[static_cast<Eigen::Index>(l)] = r.lo;
    mo.input_hi[static_cast<Eigen::Index>(l)] = r.hi;
  }
  for (std::size_t l = 0; l < w; ++l) {
    mo.input_lo[static_cast<Eigen::Index>(p + l)] = space.bound(l).lo;
    mo.input_hi[static_cast<Eigen::Index>(p + l)] = space.bound(l).hi;
  }
  MgpFit fit = MgpFit::fit(X, Z, mo);
  set_meta(fit, "conditional", model->key(), family, o, stats);
  ConditionalAux aux(family, std::move(fit), std::move(model));
  aux.stats = stats;
  return aux;
}

namespace {

MarginalAux build_marginal_impl(const std::vector<ModelPtr>& models, const std::vector<Prior>& priors,
                                const std::vector<double>& probs, const DesignSpace& space,
                                const AuxiliaryFamily& family, const AuxBuildOptions& o) {
  const std::size_t K = models.size(), w = space.w(), s = w + (K > 1 ? 1 : 0);
  if (o.M < s + 2) throw FitError("build_marginal: M must be at least s + 2");
  const auto designs = training_designs(space, o.M, o.seed);
  std::vector<std::size_t> labels(o.M, 0);
  const auto rows = fit_rows(o.M, o.N, family, designs, *models[0], o.seed, "marg-row",
                             [&](std::size_t i, std::vector<double>& y, Rng& rng) {
                               if (K > 1) {
                                 std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
                                 labels[i] = pick(rng);
                               }
                               const Model& model = *models[labels[i]];
                               const Prior& prior = priors[labels[i]];
                               for (auto& v : y) v = model.simulate(prior.sample(rng), designs[i], rng);
                             });
  AuxBuildStats stats{o.M, 0};
  for (const auto& r : rows) stats.failed += !r.ok;
  check_failures(stats.failed, o.M, o.max_failure_rate, "build_marginal");

  auto [X, Z] = stack(rows, [&](std::size_t i, double* x) {
    for (std::size_t l = 0; l < w; ++l) x[l] = designs[i][l];
    if (K > 1) x[w] = static_cast<double>(labels[i]);
  }, s, family.v());
  MgpOptions mo;
  mo.kind = K > 1 ? KernelKind::SEE : KernelKind::SE;
  mo.seed = derive_seed(o.seed, "marg-mgp");
  mo.multistarts = o.mgp_multistarts;
  mo.input_lo = Vector::Zero(static_cast<Eigen::Index>(s));
  mo.input_hi = Vector::Ones(static_cast<Eigen::Index>(s));
  for (std::size_t l = 0; l < w; ++l) {
    mo.input_lo[static_cast<Eigen::Index>(l)] = space.bound(l).lo;
    mo.input_hi[static_cast<Eigen::Index>(l)] = space.bound(l).hi;
  }
  MgpFit fit = MgpFit::fit(X, Z, mo);
  std::string key = models[0]->key();
  for (std::size_t m = 1; m < K; ++m) key += "+" + models[m]->key();
  set_meta(fit, "marginal", key, family, o, stats);
  MarginalAux aux(family, std::move(fit), models[0], K);
  aux.stats = stats;
  return aux;
}

}  // namespace

MarginalAux build_marginal(ModelPtr model, const Prior& prior, const DesignSpace& space,
                           const AuxiliaryFamily& family, const AuxBuildOptions& o) {
  return build_marginal_impl({std::move(model)}, {prior}, {1.0}, space, family, o);
}

MarginalAux build_marginal(const ModelSet& set, const AuxiliaryFamily& family, const AuxBuildOptions& o) {
  set.validate();
  return build_marginal_impl(set.models, set.priors, set.prior_probs, set.space, family, o);
}

VectorSampler marginal_sampler(ModelPtr model, const Prior& prior) {
  return [model = std::move(model), prior](const Design& D, Rng& rng) {
    const Vector theta = prior.sample(rng);
    std::vector<double> y(D.n());
    for (std::size_t k = 0; k < D.n(); ++k) y[k] = model->simulate(theta, D.row(k), rng);
    return y;
  };
}

VectorSampler fixed_theta_sampler(ModelPtr model, Vector theta) {
  return [model = std::move(model), theta = std::move(theta)](const Design& D, Rng& rng) {
    std::vector<double> y(D.n());
    for (std::size_t k = 0; k < D.n(); ++k) y[k] = model->simulate(theta, D.row(k), rng);
    return y;
  };
}

std::vector<AuxParams> marginal_params(const MarginalAux& marg, const Design& D, std::size_t m) {
  std::vector<AuxParams> out;
  out.reserve(D.n());
  for (std::size_t k = 0; k < D.n(); ++k) out.push_back(marg.phi(D.row(k), m));
  return out;
}

TCopula fit_copula(const MarginalAux& marg, const VectorSampler& sampler, const Design& D,
                   std::size_t L, std::uint64_t seed, std::size_t m, CopulaFitReport* report) {
  const std::size_t n = D.n();
  if (n == 1) return fit_tcopula(Matrix::Constant(1, 1, 0.5), report);
  if (L < n + 2) throw FitError("fit_copula: L must be at least n + 2");
  const auto params = marginal_params(marg, D, m);
  std::vector<long> trials(n);
  for (std::size_t k = 0; k < n; ++k) trials[k] = marg.trials(D.row(k));
  Matrix U(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(n));
  parallel_for(L, [&](std::size_t l) {
    Rng rng = make_rng(seed, "copula-train", l);
    const std::vector<double> y = sampler(D, rng);
    for (std::size_t k = 0; k < n; ++k)
      U(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = marg.pit_random(y[k], params[k], trials[k], rng);
  });
  return fit_tcopula(U, report);
}

double aux_marginal_loglik(const MarginalAux& marg, const std::vector<AuxParams>& params,
                           const TCopula& copula, std::span<const double> y, const Design& D,
                           CopulaDensity mode) {
  const std::size_t n = D.n();
  if (y.size() != n || params.size() != n || copula.dim() != n)
    throw Error("aux_marginal_loglik: dimension mismatch");
  double total = 0.0;
  std::vector<double> u(n);
  for (std::size_t k = 0; k < n; ++k) {
    const long t = marg.trials(D.row(k));
    const double lg = marg.family().log_density(params[k].phi, y[k], t);
    if (lg == kNegInf) return kNegInf;
    total += lg;
    u[k] = marg.pit_mid(y[k], params[k], t);
  }
  return total + copula_logdensity(copula, u, mode);
}

double aux_marginal_loglik(const MarginalAux& marg, const TCopula& copula, std::span<const double> y,
                           const Design& D, std::size_t m, CopulaDensity mode) {
  return aux_marginal_loglik(marg, marginal_params(marg, D, m), copula, y, D, mode);
}

std::vector<double> sample_coupled(const MarginalAux& marg, ModelPtr model, const Prior& prior,
                                   const Design& D, std::size_t L, std::uint64_t seed, std::size_t m) {
  Rng rng = make_rng(seed, "coupled-theta");
  const Vector theta = prior.sample(rng);
  const TCopula copula =
      fit_copula(marg, fixed_theta_sampler(std::move(model), theta), D, L, derive_seed(seed, "coupled-fit"), m);
  const Vector u = sample_tcopula(copula, rng);
  std::vector<double> y(D.n());
  for (std::size_t k = 0; k < D.n(); ++k) y[k] = marg.quantile(u[static_cast<Eigen::Index>(k)], D.row(k), m);
  return y;
}

}  // namespace auxdesign
