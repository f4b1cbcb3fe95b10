#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auxdesign/core.hpp"
#include "auxdesign/design_space.hpp"
#include "auxdesign/prior.hpp"

namespace auxdesign {

/// A simulable model y ~ F(theta, d) for a single run.
class Model {
 public:
  virtual ~Model() = default;

  virtual const std::string& key() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t design_dim() const = 0;
  virtual double simulate(const Vector& theta, std::span<const double> d, Rng& rng) const = 0;

  virtual bool has_log_density() const { return false; }
  /// Only defined when has_log_density(); throws otherwise.
  virtual double log_density(double y, const Vector& theta, std::span<const double> d) const;

  /// Upper bound of the count support for bounded responses (trial count
  /// passed to the beta-binomial family); 0 when unbounded.
  virtual long trials(std::span<const double> /*d*/) const { return 0; }
};

using ModelPtr = std::shared_ptr<const Model>;

/// Markov jump process simulated exactly with the Gillespie direct method.
class MarkovJumpModel final : public Model {
 public:
  static constexpr std::size_t kMaxState = 4;
  static constexpr std::size_t kMaxReactions = 6;
  using State = std::array<std::int64_t, kMaxState>;
  using Delta = std::array<int, kMaxState>;
  /// Writes one propensity per reaction into `rates`.
  using Propensity = std::function<void(const State&, const Vector& theta, double* rates)>;

  struct Definition {
    std::string key;
    std::size_t state_dim = 0;
    std::size_t param_dim = 0;
    std::size_t design_dim = 0;
    std::vector<Delta> deltas;
    Propensity propensity;
    std::function<State(std::span<const double>)> initial_state;
    std::function<double(std::span<const double>)> stop_time;
    std::function<double(const State&)> observe;
    std::function<long(std::span<const double>)> trials;  // optional
  };

  explicit MarkovJumpModel(Definition def);

  const std::string& key() const override { return def_.key; }
  std::size_t param_dim() const override { return def_.param_dim; }
  std::size_t design_dim() const override { return def_.design_dim; }
  double simulate(const Vector& theta, std::span<const double> d, Rng& rng) const override;
  long trials(std::span<const double> d) const override {
    return def_.trials ? def_.trials(d) : 0;
  }

  /// Runs the SSA to stop_time(d); `on_event(t, state)` (optional) sees the
  /// state after every reaction.
  State run(const Vector& theta, std::span<const double> d, Rng& rng,
            const std::function<void(double, const State&)>& on_event = {}) const;

  const Definition& definition() const { return def_; }

 private:
  Definition def_;
};

/// Model with a direct sampler and (optionally) a closed-form log-density.
class DirectModel final : public Model {
 public:
  using Sampler = std::function<double(const Vector&, std::span<const double>, Rng&)>;
  using LogDensity = std::function<double(double, const Vector&, std::span<const double>)>;

  DirectModel(std::string key, std::size_t param_dim, std::size_t design_dim, Sampler sampler,
              LogDensity log_density = {});

  const std::string& key() const override { return key_; }
  std::size_t param_dim() const override { return p_; }
  std::size_t design_dim() const override { return w_; }
  double simulate(const Vector& theta, std::span<const double> d, Rng& rng) const override {
    return sampler_(theta, d, rng);
  }
  bool has_log_density() const override { return static_cast<bool>(log_density_); }
  double log_density(double y, const Vector& theta, std::span<const double> d) const override;

 private:
  std::string key_;
  std::size_t p_, w_;
  Sampler sampler_;
  LogDensity log_density_;
};

/// Compartmental mean: 400 th2 / (th3 (th2 - th1)) (exp(-th1 t) - exp(-th2 t)),
/// continuous at th1 = th2.
double compartmental_mean(const Vector& theta, double t);
/// Compartmental variance 0.1 + 0.01 mean^2.
double compartmental_variance(const Vector& theta, double t);
double compartmental_sample(const Vector& theta, double t, Rng& rng);
double compartmental_logdensity(double y, const Vector& theta, double t);

/// Everything needed to set up a single-model design problem.
struct ModelSpec {
  ModelPtr model;
  Prior prior;
  DesignSpace space;
};

/// Keys: compartmental | aphid | parasite | epi_death | epi_si | epi_sei | epi_sei2.
ModelSpec make_model(std::string_view key);
const std::vector<std::string>& model_keys();

/// Competing models with prior model probabilities.
struct ModelSet {
  std::vector<ModelPtr> models;
  std::vector<Prior> priors;
  std::vector<double> prior_probs;
  DesignSpace space;

  std::size_t size() const { return models.size(); }
  /// Throws ConfigError unless probabilities are positive and sum to 1.
  void validate() const;
};

/// The four epidemic models (death, SI, SEI, SEI-II) with equal prior weight.
ModelSet make_epidemic_set();
ModelSet make_model_set(const std::vector<std::string>& keys, std::vector<double> probs = {});

}  // namespace auxdesign
