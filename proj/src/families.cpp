#include "auxdesign/families.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "auxdesign/optimize.hpp"

namespace auxdesign {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kDegenerate = 1e-8;
constexpr double kTiny = 1e-300;
constexpr int kStarts = 5;

// Link-scale search box per family.
constexpr double kLogMin = -30.0, kLogMax = 30.0;
constexpr double kDispersionLogMax = 15.0;
constexpr double kLogitMin = -20.0, kLogitMax = 20.0;
constexpr double kRhoLogitMax = 10.0;

double clamp_prob(double p) { return std::clamp(p, kTiny, 1.0 - 1e-16); }

double log_choose(long n, long k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

struct BetaShape {
  double a, b;
};

BetaShape beta_shape(double p, double rho) {
  const double s = (1.0 - rho) / rho;
  return {p * s, (1.0 - p) * s};
}

double betabinom_logpmf(long y, long n, double p, double rho) {
  if (y < 0 || y > n) return kNegInf;
  const auto [a, b] = beta_shape(p, rho);
  double lb;
  if (a + b > 1e6) {
    lb = 0.0;
    for (long i = 0; i < y; ++i) lb += std::log(a + i);
    for (long i = 0; i < n - y; ++i) lb += std::log(b + i);
    for (long i = 0; i < n; ++i) lb -= std::log(a + b + i);
  } else {
    lb = std::lgamma(y + a) + std::lgamma(n - y + b) - std::lgamma(n + a + b) - std::lgamma(a) -
         std::lgamma(b) + std::lgamma(a + b);
  }
  return log_choose(n, y) + lb;
}

double negbin_logpmf(double y, double mu, double k) {
  return std::lgamma(y + k) - std::lgamma(k) - std::lgamma(y + 1.0) + k * std::log(k / (k + mu)) +
         y * std::log(mu / (k + mu));
}

bool is_count(double y) { return y >= 0.0 && std::floor(y) == y; }

// (value, trials) -> multiplicity.
using Compressed = std::vector<std::pair<std::pair<double, long>, double>>;

Compressed compress(std::span<const double> y, std::span<const long> trials) {
  std::map<std::pair<double, long>, double> counts;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long n = trials.empty() ? 0 : (trials.size() == 1 ? trials[0] : trials[i]);
    counts[{y[i], n}] += 1.0;
  }
  return {counts.begin(), counts.end()};
}

}  // namespace

double apply_link(Link link, double phi) {
  switch (link) {
    case Link::Identity: return phi;
    case Link::Log: return std::log(phi);
    case Link::Logit: return std::log(phi) - std::log1p(-phi);
  }
  return phi;
}

double inverse_link(Link link, double z) {
  switch (link) {
    case Link::Identity: return z;
    case Link::Log: return std::max(std::exp(z), kTiny);
    case Link::Logit: return clamp_prob(1.0 / (1.0 + std::exp(-z)));
  }
  return z;
}

AuxiliaryFamily::AuxiliaryFamily(FamilyKind kind) : kind_(kind) {
  switch (kind) {
    case FamilyKind::Normal: links_ = {Link::Identity, Link::Log}; break;
    case FamilyKind::Poisson: links_ = {Link::Log}; break;
    case FamilyKind::NegativeBinomial: links_ = {Link::Log, Link::Log}; break;
    case FamilyKind::BetaBinomial: links_ = {Link::Logit, Link::Logit}; break;
  }
}

AuxiliaryFamily AuxiliaryFamily::from_name(std::string_view name) {
  if (name == "normal") return AuxiliaryFamily(FamilyKind::Normal);
  if (name == "poisson") return AuxiliaryFamily(FamilyKind::Poisson);
  if (name == "negbin") return AuxiliaryFamily(FamilyKind::NegativeBinomial);
  if (name == "betabinomial") return AuxiliaryFamily(FamilyKind::BetaBinomial);
  throw ConfigError("unknown auxiliary family '" + std::string(name) + "'");
}

const std::string& AuxiliaryFamily::name() const {
  static const std::string names[] = {"normal", "poisson", "negbin", "betabinomial"};
  return names[static_cast<int>(kind_)];
}

Vector AuxiliaryFamily::to_link(const Vector& phi) const {
  Vector z(phi.size());
  for (Eigen::Index i = 0; i < phi.size(); ++i) z[i] = apply_link(links_[i], phi[i]);
  return z;
}

Vector AuxiliaryFamily::from_link(const Vector& z) const {
  Vector phi(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) phi[i] = inverse_link(links_[i], z[i]);
  return phi;
}

bool AuxiliaryFamily::valid(const Vector& phi) const {
  if (static_cast<std::size_t>(phi.size()) != v() || !phi.allFinite()) return false;
  switch (kind_) {
    case FamilyKind::Normal: return phi[1] > 0.0;
    case FamilyKind::Poisson: return phi[0] > 0.0;
    case FamilyKind::NegativeBinomial: return phi[0] > 0.0 && phi[1] > 0.0;
    case FamilyKind::BetaBinomial:
      return phi[0] > 0.0 && phi[0] < 1.0 && phi[1] > 0.0 && phi[1] < 1.0;
  }
  return false;
}

double AuxiliaryFamily::log_density(const Vector& phi, double y, long trials) const {
  switch (kind_) {
    case FamilyKind::Normal: {
      const double r = y - phi[0];
      return -0.5 * (kLogTwoPi + std::log(phi[1]) + r * r / phi[1]);
    }
    case FamilyKind::Poisson:
      if (!is_count(y)) return kNegInf;
      return y * std::log(phi[0]) - phi[0] - std::lgamma(y + 1.0);
    case FamilyKind::NegativeBinomial:
      if (!is_count(y)) return kNegInf;
      return negbin_logpmf(y, phi[0], phi[1]);
    case FamilyKind::BetaBinomial:
      if (!is_count(y)) return kNegInf;
      return betabinom_logpmf(static_cast<long>(y), trials, phi[0], phi[1]);
  }
  return kNegInf;
}

double AuxiliaryFamily::cdf(const Vector& phi, double y, long trials) const {
  if (kind_ == FamilyKind::Normal)
    return 0.5 * std::erfc(-(y - phi[0]) / std::sqrt(2.0 * phi[1]));
  if (y < 0.0) return 0.0;
  const double k = std::floor(y);
  switch (kind_) {
    case FamilyKind::Poisson: return boost::math::gamma_q(k + 1.0, phi[0]);
    case FamilyKind::NegativeBinomial:
      return boost::math::ibeta(phi[1], k + 1.0, phi[1] / (phi[1] + phi[0]));
    case FamilyKind::BetaBinomial: {
      if (k >= static_cast<double>(trials)) return 1.0;
      double acc = 0.0;
      for (long j = 0; j <= static_cast<long>(k); ++j)
        acc += std::exp(betabinom_logpmf(j, trials, phi[0], phi[1]));
      return std::min(acc, 1.0);
    }
    default: return 0.0;
  }
}

double AuxiliaryFamily::quantile(const Vector& phi, double u, long trials) const {
  if (kind_ == FamilyKind::Normal)
    return phi[0] - std::sqrt(2.0 * phi[1]) * boost::math::erfc_inv(2.0 * u);
  if (u <= 0.0) return 0.0;
  if (kind_ == FamilyKind::BetaBinomial) {
    double acc = 0.0;
    for (long j = 0; j < trials; ++j) {
      acc += std::exp(betabinom_logpmf(j, trials, phi[0], phi[1]));
      if (acc >= u) return static_cast<double>(j);
    }
    return static_cast<double>(trials);
  }
  // Bracket then bisect on the integers: cdf(lo) < u <= cdf(hi).
  const double mean = phi[0];
  const double var = kind_ == FamilyKind::Poisson ? mean : mean + mean * mean / phi[1];
  double hi = std::max(0.0, std::ceil(mean + 2.0 * std::sqrt(var)));
  double step = std::max(1.0, std::ceil(std::sqrt(var)));
  while (cdf(phi, hi) < u) {
    hi += step;
    step *= 2.0;
    if (hi > 1e15) return hi;
  }
  double lo = -1.0;
  while (hi - lo > 1.0) {
    const double mid = std::floor(0.5 * (lo + hi));
    if (cdf(phi, mid) >= u)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double AuxiliaryFamily::sample(const Vector& phi, long trials, Rng& rng) const {
  switch (kind_) {
    case FamilyKind::Normal: {
      std::normal_distribution<double> norm(phi[0], std::sqrt(phi[1]));
      return norm(rng);
    }
    case FamilyKind::Poisson: {
      std::poisson_distribution<long long> pois(phi[0]);
      return static_cast<double>(pois(rng));
    }
    case FamilyKind::NegativeBinomial: {
      std::gamma_distribution<double> gam(phi[1], phi[0] / phi[1]);
      const double lambda = gam(rng);
      if (!(lambda > 0.0)) return 0.0;
      std::poisson_distribution<long long> pois(lambda);
      return static_cast<double>(pois(rng));
    }
    case FamilyKind::BetaBinomial: {
      const auto [a, b] = beta_shape(phi[0], phi[1]);
      std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
      const double x = ga(rng), w = gb(rng);
      const double p = x + w > 0.0 ? x / (x + w) : phi[0];
      std::binomial_distribution<long> bin(trials, std::clamp(p, 0.0, 1.0));
      return static_cast<double>(bin(rng));
    }
  }
  return 0.0;
}

MleFit AuxiliaryFamily::fit_mle(std::span<const double> sample, std::span<const long> trials) const {
  MleFit out;
  const auto n = static_cast<double>(sample.size());
  if (sample.empty()) {
    out.status = "empty sample";
    return out;
  }
  if (!trials.empty() && trials.size() != 1 && trials.size() != sample.size())
    throw Error("fit_mle: trials must be empty, scalar or one per observation");
  for (double y : sample)
    if (!std::isfinite(y) || (discrete() && !is_count(y))) {
      out.status = "sample outside the support";
      return out;
    }

  double mean = 0.0;
  for (double y : sample) mean += y;
  mean /= n;
  double var = 0.0;
  for (double y : sample) var += (y - mean) * (y - mean);
  var /= n;

  const auto finish = [&](Vector phi, std::string status) {
    out.params = from_phi(phi);
    out.loglik = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const long t = trials.empty() ? 0 : (trials.size() == 1 ? trials[0] : trials[i]);
      out.loglik += log_density(phi, sample[i], t);
    }
    out.ok = std::isfinite(out.loglik);
    out.status = out.ok ? std::move(status) : "non-finite likelihood";
    return out;
  };

  if (kind_ == FamilyKind::Normal) {
    Vector phi{{mean, std::max(var, kDegenerate)}};
    out.start_loglik = kNegInf;
    return finish(phi, var > 0.0 ? "closed form" : "degenerate");
  }
  if (kind_ == FamilyKind::Poisson)
    return finish(Vector{{std::max(mean, kDegenerate)}}, mean > 0.0 ? "closed form" : "degenerate");

  const Compressed data = compress(sample, trials);
  Vector z0(2), lower(2), upper(2);
  if (kind_ == FamilyKind::NegativeBinomial) {
    if (mean <= 0.0) {
      return finish(Vector{{kDegenerate, std::exp(kDispersionLogMax)}}, "degenerate");
    }
    const double k0 = var > mean * (1.0 + 1e-6) ? mean * mean / (var - mean)
                                                  : std::exp(kDispersionLogMax);
    lower << kLogMin, kLogMin;
    upper << kLogMax, kDispersionLogMax;
    z0 << std::log(mean), std::clamp(std::log(k0), kLogMin, kDispersionLogMax);
  } else {
    double total_y = 0.0, total_n = 0.0;
    for (const auto& [key, c] : data) {
      total_y += c * key.first;
      total_n += c * static_cast<double>(key.second);
    }
    for (const auto& [key, c] : data)
      if (key.first > static_cast<double>(key.second)) {
        out.status = "count exceeds trial size";
        return out;
      }
    if (total_n <= 0.0) {
      out.status = "beta-binomial needs positive trial counts";
      return out;
    }
    const double pbar = total_y / total_n;
    const double mean_n = total_n / n;
    const double rho_min = inverse_link(Link::Logit, kLogitMin);
    if (total_y <= 0.0 || total_y >= total_n)
      return finish(Vector{{std::clamp(pbar, kDegenerate, 1.0 - kDegenerate), rho_min}},
                    "degenerate");
    double rho0 = 1e-3;
    if (mean_n > 1.0) {
      const double binom_var = mean_n * pbar * (1.0 - pbar);
      rho0 = (var / binom_var - 1.0) / (mean_n - 1.0);
    }
    rho0 = std::clamp(rho0, 1e-6, 0.99);
    lower << kLogitMin, kLogitMin;
    upper << kLogitMax, kRhoLogitMax;
    z0 << apply_link(Link::Logit, pbar), apply_link(Link::Logit, rho0);
  }

  const auto negloglik = [&](const Vector& z) {
    const Vector phi = from_link(z);
    double ll = 0.0;
    for (const auto& [key, c] : data) ll += c * log_density(phi, key.first, key.second);
    return std::isfinite(ll) ? -ll : kInf;
  };

  out.start_loglik = -negloglik(z0);
  Rng rng(derive_seed(static_cast<std::uint64_t>(sample.size()), "mle-jitter",
                      static_cast<std::uint64_t>(std::abs(mean * 1e6))));
  std::normal_distribution<double> jitter(0.0, 0.5);
  MinimizeResult best;
  bool any_converged = false;
  for (int s = 0; s < kStarts; ++s) {
    Vector start = z0;
    if (s > 0)
      for (Eigen::Index i = 0; i < start.size(); ++i)
        start[i] = std::clamp(start[i] + jitter(rng), lower[i], upper[i]);
    MinimizeResult r = minimize_box(negloglik, start, lower, upper);
    if (!std::isfinite(r.value)) continue;
    any_converged = any_converged || r.converged;
    if (r.value < best.value) best = std::move(r);
  }
  if (!std::isfinite(best.value)) {
    out.status = "optimizer failed from every start";
    return out;
  }
  if (-best.value < out.start_loglik) best = {z0, -out.start_loglik};
  MleFit fit = finish(from_link(best.x), any_converged ? "converged" : "not converged");
  fit.start_loglik = out.start_loglik;
  fit.params = from_z(best.x);
  if (!any_converged) fit.ok = false;
  return fit;
}

}  // namespace auxdesign
