#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "auxdesign/ace.hpp"

using namespace auxdesign;

namespace {

// Student-t cdf via the regularized incomplete beta.
double t_cdf(double t, double nu) {
  const double tail = 0.5 * boost::math::ibeta(0.5 * nu, 0.5, nu / (nu + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

double quadratic(const Design& D, const std::vector<double>& target) {
  double s = 0.0;
  for (std::size_t k = 0; k < D.n(); ++k) s += (D(k, 0) - target[k]) * (D(k, 0) - target[k]);
  return -s;
}

UtilitySampler noisy_quadratic(std::vector<double> target, double sd) {
  return [target, sd](const Design& D, std::size_t B, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, sd);
    const double base = quadratic(D, target);
    std::vector<double> u(B);
    for (auto& v : u) v = base + (sd > 0 ? noise(rng) : 0.0);
    return u;
  };
}

}  // namespace

TEST_CASE("normal acceptance probability") {
  const std::vector<double> a{0.3, 1.1, -0.4, 2.0};
  CHECK(acceptance_normal(a, a) == doctest::Approx(0.5).epsilon(1e-14));

  const std::vector<double> uc{0.0, 1.0, 2.0}, us{1.0, 2.0, 3.0};
  // B = 3, pooled variance 1, statistic -(6 - 3) / sqrt(6) on 4 degrees of freedom.
  CHECK(acceptance_normal(uc, us) == doctest::Approx(1.0 - t_cdf(-3.0 / std::sqrt(6.0), 4.0)).epsilon(1e-12));
  CHECK(acceptance_normal(us, uc) == doctest::Approx(1.0 - t_cdf(3.0 / std::sqrt(6.0), 4.0)).epsilon(1e-12));

  std::vector<double> low(500), high(500);
  Rng rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t b = 0; b < 500; ++b) {
    low[b] = z(rng);
    high[b] = 5.0 + z(rng);
  }
  CHECK(acceptance_normal(low, high) > 0.999);
  CHECK(acceptance_normal(high, low) < 0.001);

  CHECK(acceptance_normal(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
  CHECK(acceptance_normal(std::vector<double>{1, 1}, std::vector<double>{0, 0}) == 0.0);
  CHECK(acceptance_normal(std::vector<double>{2, 2}, std::vector<double>{2, 2}) == 0.5);
  CHECK_THROWS_AS(acceptance_normal(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("binary acceptance probability") {
  const std::size_t B = 20000;
  std::vector<double> half(B), other(B);
  for (std::size_t b = 0; b < B; ++b) {
    half[b] = b % 2 == 0 ? 1.0 : 0.0;
    other[b] = b % 2 == 1 ? 1.0 : 0.0;
  }
  Rng rng(3);
  const double same = acceptance_binary(half, other, rng);
  CHECK(std::abs(same - 0.5) < 0.02);

  const std::vector<double> zeros(B, 0.0), ones(B, 1.0);
  CHECK(acceptance_binary(zeros, ones, rng) > 0.999);
  CHECK(acceptance_binary(ones, zeros, rng) < 0.001);

  // P(rho* > rho_C) for two Beta posteriors, by quadrature.
  std::vector<double> uc(B, 0.0), us(B, 0.0);
  for (std::size_t b = 0; b < 10000; ++b) uc[b] = 1.0;
  for (std::size_t b = 0; b < 10150; ++b) us[b] = 1.0;
  const double ac = 1.0 + 10000, bc = 1.0 + B - 10000;
  const double as = 1.0 + 10150, bs = 1.0 + B - 10150;
  const double expect = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double r) {
        const double log_pdf = (ac - 1) * std::log(r) + (bc - 1) * std::log1p(-r) -
                               (std::lgamma(ac) + std::lgamma(bc) - std::lgamma(ac + bc));
        return std::exp(log_pdf) * boost::math::ibetac(as, bs, r);
      },
      0.47, 0.53, 15, 1e-12);
  const double p = acceptance_binary(uc, us, rng);
  CHECK(std::abs(p - expect) < 0.01);
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
}

TEST_CASE("coordinate exchange recovers a known optimum") {
  const std::vector<double> target{0.2, 0.45, 0.6, 0.85};
  const DesignSpace space({{0.0, 1.0}});
  AceConfig cfg;
  cfg.Q = 20;
  cfg.B_fit = 100;
  cfg.B_test = 1000;
  cfg.B_final = 1000;
  cfg.iterations = 4;
  cfg.restarts = 2;
  const AceResult res = ace_optimize(noisy_quadratic(target, 0.05), space, 4, cfg, 11);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(res.best(k, 0) - target[k]) < 0.05);
  CHECK(res.trace.restart_designs.size() == 2);
  CHECK(res.trace.iterations.size() == 8);
  CHECK(res.trace.steps.size() == 2 * 4 * 4);
}

TEST_CASE("zero-noise utility only accepts improvements") {
  const std::vector<double> target{0.1, 0.9, 0.5};
  const DesignSpace space({{0.0, 1.0}});
  AceConfig cfg;
  cfg.Q = 6;
  cfg.B_fit = 2;
  cfg.B_test = 2;
  cfg.B_final = 2;
  cfg.iterations = 3;
  cfg.restarts = 1;
  const AceResult res = ace_optimize(noisy_quadratic(target, 0.0), space, 3, cfg, 4);
  // The utility is separable, so each move's gain depends on its own run only.
  int accepted = 0;
  for (const AceStep& s : res.trace.steps) {
    if (!s.accepted) continue;
    ++accepted;
    CHECK(s.p_star == 1.0);
    const double t = target[s.run];
    CHECK((s.proposed - t) * (s.proposed - t) < (s.current - t) * (s.current - t));
  }
  CHECK(accepted > 0);
}

TEST_CASE("trace designs respect spacing constraints and are reproducible") {
  const std::vector<double> target{0.5, 0.5, 0.5};
  const DesignSpace space({{0.0, 1.0}}, {{0, 0.2}});
  AceConfig cfg;
  cfg.Q = 8;
  cfg.B_fit = 20;
  cfg.B_test = 50;
  cfg.B_final = 50;
  cfg.iterations = 2;
  cfg.restarts = 2;
  const AceResult a = ace_optimize(noisy_quadratic(target, 0.1), space, 3, cfg, 99);
  const AceResult b = ace_optimize(noisy_quadratic(target, 0.1), space, 3, cfg, 99);
  for (const AceIteration& it : a.trace.iterations) CHECK(check_constraints(it.design, space).feasible);
  CHECK(check_constraints(a.best, space).feasible);
  REQUIRE(a.trace.steps.size() == b.trace.steps.size());
  for (std::size_t s = 0; s < a.trace.steps.size(); ++s) {
    CHECK(a.trace.steps[s].p_star == b.trace.steps[s].p_star);
    CHECK(a.trace.steps[s].proposed == b.trace.steps[s].proposed);
  }
  std::ostringstream csv;
  write_ace_trace_csv(csv, a.trace);
  CHECK(csv.str().rfind("restart,iteration,run,coord,current,proposed,emulated_max,p_star,accepted,note\n", 0) == 0);
}

TEST_CASE("configuration validation") {
  AceConfig cfg;
  cfg.Q = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.Q = 4;
  cfg.B_test = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(acceptance_from_name("binary") == AcceptanceMode::Binary);
  CHECK_THROWS_AS(acceptance_from_name("bayes"), ConfigError);
}
