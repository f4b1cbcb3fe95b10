#include "auxdesign/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace auxdesign {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

}  // namespace

double Model::log_density(double, const Vector&, std::span<const double>) const {
  throw Error("model '" + key() + "' has no tractable likelihood");
}

MarkovJumpModel::MarkovJumpModel(Definition def) : def_(std::move(def)) {
  if (def_.state_dim == 0 || def_.state_dim > kMaxState)
    throw ConfigError("jump model state dimension out of range");
  if (def_.deltas.empty() || def_.deltas.size() > kMaxReactions)
    throw ConfigError("jump model reaction count out of range");
  if (!def_.propensity || !def_.initial_state || !def_.stop_time || !def_.observe)
    throw ConfigError("jump model definition is incomplete");
}

MarkovJumpModel::State MarkovJumpModel::run(
    const Vector& theta, std::span<const double> d, Rng& rng,
    const std::function<void(double, const State&)>& on_event) const {
  State x = def_.initial_state(d);
  const double stop = def_.stop_time(d);
  const std::size_t nr = def_.deltas.size();
  std::array<double, kMaxReactions> rates{};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double t = 0.0;
  for (;;) {
    def_.propensity(x, theta, rates.data());
    double total = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      if (rates[r] < 0.0 || std::isnan(rates[r]))
        throw Error("model '" + def_.key + "': negative or NaN propensity for reaction " +
                    std::to_string(r + 1));
      total += rates[r];
    }
    if (!(total > 0.0)) break;  // absorbing: state frozen until stop time
    t += -std::log1p(-unif(rng)) / total;
    if (t > stop) break;
    double target = unif(rng) * total;
    std::size_t r = 0;
    for (; r + 1 < nr; ++r) {
      if (target < rates[r]) break;
      target -= rates[r];
    }
    // Guard against rounding landing on a zero-rate tail reaction.
    while (rates[r] <= 0.0 && r > 0) --r;
    for (std::size_t s = 0; s < def_.state_dim; ++s) {
      x[s] += def_.deltas[r][s];
      if (x[s] < 0)
        throw Error("model '" + def_.key + "': state component went negative");
    }
    if (on_event) on_event(t, x);
  }
  return x;
}

double MarkovJumpModel::simulate(const Vector& theta, std::span<const double> d, Rng& rng) const {
  return def_.observe(run(theta, d, rng));
}

DirectModel::DirectModel(std::string key, std::size_t param_dim, std::size_t design_dim,
                         Sampler sampler, LogDensity log_density)
    : key_(std::move(key)),
      p_(param_dim),
      w_(design_dim),
      sampler_(std::move(sampler)),
      log_density_(std::move(log_density)) {}

double DirectModel::log_density(double y, const Vector& theta, std::span<const double> d) const {
  if (!log_density_) return Model::log_density(y, theta, d);
  return log_density_(y, theta, d);
}

double compartmental_mean(const Vector& theta, double t) {
  const double k1 = theta[0], k2 = theta[1], v = theta[2];
  const double diff = k2 - k1;
  if (diff == 0.0) return 400.0 * k1 * t * std::exp(-k1 * t) / v;
  // exp(-k1 t) - exp(-k2 t) = -exp(-k1 t) expm1(-(k2 - k1) t)
  return 400.0 * k2 / (v * diff) * (-std::exp(-k1 * t) * std::expm1(-diff * t));
}

double compartmental_variance(const Vector& theta, double t) {
  const double mu = compartmental_mean(theta, t);
  return 0.1 + 0.01 * mu * mu;
}

double compartmental_sample(const Vector& theta, double t, Rng& rng) {
  const double mu = compartmental_mean(theta, t);
  std::normal_distribution<double> norm(mu, std::sqrt(0.1 + 0.01 * mu * mu));
  return norm(rng);
}

double compartmental_logdensity(double y, const Vector& theta, double t) {
  const double mu = compartmental_mean(theta, t);
  const double var = 0.1 + 0.01 * mu * mu;
  return -0.5 * (kLogTwoPi + std::log(var)) - (y - mu) * (y - mu) / (2.0 * var);
}

namespace {

using State = MarkovJumpModel::State;
using Delta = MarkovJumpModel::Delta;

constexpr long kEpidemicPopulation = 200;

ModelSpec compartmental() {
  auto model = std::make_shared<DirectModel>(
      "compartmental", 3, 1,
      [](const Vector& th, std::span<const double> d, Rng& rng) {
        return compartmental_sample(th, d[0], rng);
      },
      [](double y, const Vector& th, std::span<const double> d) {
        return compartmental_logdensity(y, th, d[0]);
      });
  Prior prior({Prior::lognormal({0, 1, 2}, Vector{{std::log(0.1), std::log(1.0), std::log(20.0)}},
                                Vector::Constant(3, 0.05))});
  // Sampling times in hours, at least 15 minutes apart.
  DesignSpace space({{0.0, 24.0}}, {{0, 0.25}});
  return {model, std::move(prior), std::move(space)};
}

ModelSpec aphid() {
  MarkovJumpModel::Definition def;
  def.key = "aphid";
  def.state_dim = 2;  // (N, C)
  def.param_dim = 2;
  def.design_dim = 1;
  def.deltas = {Delta{1, 1, 0, 0}, Delta{-1, 0, 0, 0}};
  def.propensity = [](const State& x, const Vector& th, double* r) {
    r[0] = th[0] * static_cast<double>(x[0]);
    r[1] = th[1] * static_cast<double>(x[0]) * static_cast<double>(x[1]);
  };
  def.initial_state = [](std::span<const double>) { return State{28, 28, 0, 0}; };
  def.stop_time = [](std::span<const double> d) { return d[0]; };
  def.observe = [](const State& x) { return static_cast<double>(x[0]); };
  Matrix cov{{6.24e-5, 5.80e-8}, {5.80e-8, 4.00e-10}};
  Prior prior({Prior::multivariate_normal({0, 1}, Vector{{2.46e-1, 1.34e-4}}, cov, true)});
  DesignSpace space({{0.0, 49.0}});
  return {std::make_shared<MarkovJumpModel>(std::move(def)), std::move(prior), std::move(space)};
}

ModelSpec parasite() {
  constexpr double kEps = 1e-6;
  MarkovJumpModel::Definition def;
  def.key = "parasite";
  def.state_dim = 3;  // (J, M, I)
  def.param_dim = 6;
  def.design_dim = 2;  // (larvae injected, autopsy day)
  def.deltas = {Delta{-1, 1, 0, 0}, Delta{-1, 0, 0, 0}, Delta{0, -1, 0, 0}, Delta{0, 0, 1, 0},
                Delta{0, 0, -1, 0}};
  def.propensity = [](const State& x, const Vector& th, double* r) {
    const double J = static_cast<double>(x[0]), M = static_cast<double>(x[1]),
                 I = static_cast<double>(x[2]);
    r[0] = th[0] * J;               // maturation
    r[1] = (th[3] + th[4] * I) * J;  // juvenile death
    r[2] = th[1] * M;               // mature death
    r[3] = th[2] * J;               // immunity gain
    r[4] = th[5] * I;               // immunity loss
  };
  def.initial_state = [](std::span<const double> d) {
    return State{static_cast<std::int64_t>(std::lround(d[0])), 0, 0, 0};
  };
  def.stop_time = [](std::span<const double> d) { return d[1]; };
  def.observe = [](const State& x) { return static_cast<double>(x[1]); };
  def.trials = [](std::span<const double> d) { return std::lround(d[0]); };
  Matrix cov{{2.03e-5, -1.07e-4}, {-1.07e-4, 1.17e-3}};
  Prior prior({Prior::gamma({0, 1, 4, 5}, Vector{{0.04, 0.00147, 1.10, 0.31}},
                            Vector{{4.00e-4, 2.56e-7, 0.21, 0.18}}),
               Prior::sqrt_bivariate_normal(2, 3, Vector{{0.0361, 0.0854}}, cov)});
  DesignSpace space({{100.0, 200.0}, {30.0 + kEps, 300.0 - kEps}});
  return {std::make_shared<MarkovJumpModel>(std::move(def)), std::move(prior), std::move(space)};
}

MarkovJumpModel::Definition epidemic_base(std::string key, std::size_t p) {
  MarkovJumpModel::Definition def;
  def.key = std::move(key);
  def.state_dim = 3;  // (S, E, I)
  def.param_dim = p;
  def.design_dim = 1;
  def.initial_state = [](std::span<const double>) { return State{kEpidemicPopulation, 0, 0, 0}; };
  def.stop_time = [](std::span<const double> d) { return d[0]; };
  def.observe = [](const State& x) { return static_cast<double>(x[2]); };
  def.trials = [](std::span<const double>) { return kEpidemicPopulation; };
  return def;
}

ModelSpec epidemic(std::string_view key) {
  MarkovJumpModel::Definition def;
  Prior prior;
  if (key == "epi_death") {
    def = epidemic_base("epi_death", 1);
    def.deltas = {Delta{-1, 0, 1, 0}};
    def.propensity = [](const State& x, const Vector& th, double* r) {
      r[0] = th[0] * static_cast<double>(x[0]);
    };
    prior = Prior({Prior::uniform({0}, Vector{{0.0}}, Vector{{0.5}})});
  } else if (key == "epi_si") {
    def = epidemic_base("epi_si", 2);
    def.deltas = {Delta{-1, 0, 1, 0}};
    def.propensity = [](const State& x, const Vector& th, double* r) {
      r[0] = (th[0] + th[1] * static_cast<double>(x[2])) * static_cast<double>(x[0]);
    };
    prior = Prior({Prior::uniform({0, 1}, Vector{{0.0, 0.0}}, Vector{{0.5, 0.005}})});
  } else if (key == "epi_sei") {
    def = epidemic_base("epi_sei", 2);
    def.deltas = {Delta{-1, 1, 0, 0}, Delta{0, -1, 1, 0}};
    def.propensity = [](const State& x, const Vector& th, double* r) {
      r[0] = th[0] * static_cast<double>(x[0]);
      r[1] = static_cast<double>(x[1]) / th[1];
    };
    prior = Prior({Prior::uniform({0, 1}, Vector{{0.0, 0.0}}, Vector{{0.5, 10.0}})});
  } else {
    def = epidemic_base("epi_sei2", 3);
    def.deltas = {Delta{-1, 1, 0, 0}, Delta{0, -1, 1, 0}};
    def.propensity = [](const State& x, const Vector& th, double* r) {
      r[0] = (th[0] + th[1] * static_cast<double>(x[2])) * static_cast<double>(x[0]);
      r[1] = static_cast<double>(x[1]) / th[2];
    };
    prior = Prior({Prior::uniform({0, 1, 2}, Vector{{0.0, 0.0, 0.0}}, Vector{{0.5, 0.005, 10.0}})});
  }
  DesignSpace space({{0.0, 10.0}});
  return {std::make_shared<MarkovJumpModel>(std::move(def)), std::move(prior), std::move(space)};
}

}  // namespace

const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys{"compartmental", "aphid",  "parasite", "epi_death",
                                             "epi_si",        "epi_sei", "epi_sei2"};
  return keys;
}

ModelSpec make_model(std::string_view key) {
  if (key == "compartmental") return compartmental();
  if (key == "aphid") return aphid();
  if (key == "parasite") return parasite();
  if (key == "epi_death" || key == "epi_si" || key == "epi_sei" || key == "epi_sei2")
    return epidemic(key);
  throw ConfigError("unknown model key '" + std::string(key) + "'");
}

void ModelSet::validate() const {
  if (models.empty()) throw ConfigError("model set is empty");
  if (priors.size() != models.size() || prior_probs.size() != models.size())
    throw ConfigError("model set: models, priors and probabilities must align");
  double total = 0.0;
  for (double p : prior_probs) {
    if (!(p > 0.0)) throw ConfigError("model set: prior probabilities must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("model set: prior probabilities must sum to 1");
  for (const auto& m : models)
    if (m->design_dim() != space.w()) throw ConfigError("model set: design dimensions differ");
}

ModelSet make_model_set(const std::vector<std::string>& keys, std::vector<double> probs) {
  ModelSet set;
  for (const auto& k : keys) {
    ModelSpec spec = make_model(k);
    if (set.models.empty()) set.space = spec.space;
    set.models.push_back(spec.model);
    set.priors.push_back(std::move(spec.prior));
  }
  if (probs.empty()) probs.assign(keys.size(), 1.0 / static_cast<double>(keys.size()));
  set.prior_probs = std::move(probs);
  set.validate();
  return set;
}

ModelSet make_epidemic_set() {
  return make_model_set({"epi_death", "epi_si", "epi_sei", "epi_sei2"});
}

}  // namespace auxdesign
