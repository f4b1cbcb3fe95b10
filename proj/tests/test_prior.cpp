#include <doctest.h>

#include <cmath>

#include "auxdesign/prior.hpp"

using namespace auxdesign;

TEST_CASE("invalid priors are rejected") {
  CHECK_THROWS_AS(Prior({Prior::uniform({0}, Vector{{1.0}}, Vector{{0.0}})}), ConfigError);
  CHECK_THROWS_AS(Prior({Prior::gamma({0}, Vector{{-1.0}}, Vector{{1.0}})}), ConfigError);
  CHECK_THROWS_AS(Prior({Prior::multivariate_normal({0, 1}, Vector::Zero(2), Matrix{{1.0, 2.0}, {2.0, 1.0}})}),
                  ConfigError);
  CHECK_THROWS_AS(Prior({Prior::uniform({0}, Vector{{0.0}}, Vector{{1.0}}),
                         Prior::uniform({0}, Vector{{0.0}}, Vector{{1.0}})}),
                  ConfigError);
  CHECK_THROWS_AS(Prior({Prior::uniform({1}, Vector{{0.0}}, Vector{{1.0}})}), ConfigError);
}

TEST_CASE("lognormal and gamma moments") {
  const Prior prior({Prior::lognormal({0}, Vector{{std::log(20.0)}}, Vector{{0.05}}),
                     Prior::gamma({1}, Vector{{1.1}}, Vector{{0.21}})});
  Rng rng(2);
  const int N = 200000;
  double s0 = 0, s1 = 0, q1 = 0;
  for (int i = 0; i < N; ++i) {
    const Vector t = prior.sample(rng);
    s0 += t[0];
    s1 += t[1];
    q1 += t[1] * t[1];
  }
  CHECK(s0 / N == doctest::Approx(20.0 * std::exp(0.025)).epsilon(0.003));
  CHECK(s1 / N == doctest::Approx(1.1).epsilon(0.01));
  CHECK(q1 / N - (s1 / N) * (s1 / N) == doctest::Approx(0.21).epsilon(0.03));
}

TEST_CASE("densities integrate to one") {
  SUBCASE("gamma") {
    const Prior prior({Prior::gamma({0}, Vector{{0.04}}, Vector{{4e-4}})});
    double total = 0.0;
    const double h = 1e-5;
    for (double x = h / 2; x < 0.5; x += h) total += std::exp(prior.log_density(Vector{{x}})) * h;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("square of a bivariate normal") {
    const Prior prior({Prior::sqrt_bivariate_normal(0, 1, Vector{{0.3, -0.2}}, Matrix{{0.04, 0.01}, {0.01, 0.05}})});
    // Substitute theta = r^2 so the integrand is smooth.
    double total = 0.0;
    const double h = 2e-3;
    for (double a = h / 2; a < 1.5; a += h)
      for (double b = h / 2; b < 1.5; b += h)
        total += std::exp(prior.log_density(Vector{{a * a, b * b}})) * 4 * a * b * h * h;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("truncated normal stays nonnegative and reports support") {
  const Prior prior({Prior::multivariate_normal({0, 1}, Vector{{2.46e-1, 1.34e-4}},
                                                Matrix{{6.24e-5, 5.80e-8}, {5.80e-8, 4.00e-10}}, true)});
  Rng rng(8);
  for (int i = 0; i < 5000; ++i) CHECK((prior.sample(rng).array() >= 0.0).all());
  CHECK(prior.log_density(Vector{{0.25, -1e-6}}) == kNegInf);
  CHECK(std::isfinite(prior.log_density(Vector{{0.25, 1e-4}})));
}

TEST_CASE("marginal range covers the central mass") {
  const Prior prior({Prior::lognormal({0, 1, 2}, Vector{{std::log(0.1), 0.0, std::log(20.0)}}, Vector::Constant(3, 0.05))});
  Rng rng(9);
  const int N = 100000;
  int inside = 0;
  const Interval r = prior.marginal_range(2);
  for (int i = 0; i < N; ++i) {
    const double x = prior.sample(rng)[2];
    inside += (x >= r.lo && x <= r.hi);
  }
  CHECK(static_cast<double>(inside) / N == doctest::Approx(0.998).epsilon(0.001));
  CHECK_THROWS_AS(prior.marginal_range(3), Error);
}
