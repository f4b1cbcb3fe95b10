#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "auxdesign/design_space.hpp"

using namespace auxdesign;

TEST_CASE("bounds and constraints are validated") {
  CHECK_THROWS_AS(DesignSpace({{1.0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(DesignSpace({{0.0, 1.0}}, {{1, 0.1}}), ConfigError);
  CHECK_THROWS_AS(DesignSpace({{0.0, 1.0}}, {{0, -0.1}}), ConfigError);
  CHECK_THROWS_AS(DesignSpace(std::vector<Interval>{}), ConfigError);
}

TEST_CASE("latin hypercube stratifies every margin") {
  const DesignSpace space({{0.0, 24.0}, {-1.0, 3.0}});
  const std::size_t M = 37;
  const auto pts = latin_hypercube(space, M, 12);
  REQUIRE(pts.size() == M);
  for (std::size_t l = 0; l < 2; ++l) {
    std::set<long> cells;
    for (const auto& p : pts) {
      const auto u = space.to_unit(p);
      CHECK(u[l] >= 0.0);
      CHECK(u[l] < 1.0);
      cells.insert(static_cast<long>(std::floor(u[l] * M)));
    }
    CHECK(cells.size() == M);
  }
  CHECK(latin_hypercube(space, M, 12) == pts);
  CHECK_THROWS_AS(latin_hypercube(space, 1, 0), ConfigError);
}

TEST_CASE("equally spaced design uses interior points") {
  const DesignSpace space({{0.0, 24.0}});
  const Design d = equally_spaced(space, 15);
  REQUIRE(d.n() == 15);
  for (std::size_t k = 0; k < 15; ++k) CHECK(d(k, 0) == doctest::Approx(24.0 * (k + 1) / 16.0));
  CHECK(check_constraints(d, DesignSpace({{0.0, 24.0}}, {{0, 0.25}})).feasible);
}

TEST_CASE("spacing constraint is inclusive") {
  const DesignSpace space({{0.0, 24.0}}, {{0, 0.25}});
  CHECK(check_constraints(Design::from_points({{1.0}, {1.25}, {5.0}}), space).feasible);
  const auto bad = check_constraints(Design::from_points({{1.0}, {1.2}, {5.0}}), space);
  CHECK_FALSE(bad.feasible);
  CHECK_FALSE(bad.violations.empty());
  CHECK_FALSE(check_constraints(Design::from_points({{25.0}}), space).feasible);
}

TEST_CASE("projection finds the nearest feasible value") {
  const DesignSpace space({{0.0, 24.0}}, {{0, 0.25}});
  Rng rng(5);
  std::uniform_real_distribution<double> unif(0.0, 24.0);
  for (int trial = 0; trial < 200; ++trial) {
    Design d = random_feasible_design(space, 10, rng);
    REQUIRE(check_constraints(d, space).feasible);
    const double proposal = unif(rng) * 1.2 - 2.0;
    double projected = 0.0;
    REQUIRE(project_coordinate(d, space, 3, 0, proposal, projected));
    Design moved = d;
    moved(3, 0) = projected;
    CHECK(check_constraints(moved, space).feasible);
    // Brute-force oracle on a fine grid.
    double best = kInf;
    for (int g = 0; g <= 24000; ++g) {
      Design probe = d;
      probe(3, 0) = 24.0 * g / 24000.0;
      if (check_constraints(probe, space).feasible)
        best = std::min(best, std::abs(probe(3, 0) - proposal));
    }
    CHECK(std::abs(projected - proposal) <= best + 1e-9);
  }
}

TEST_CASE("random feasible designs satisfy constraints") {
  const DesignSpace space({{0.0, 24.0}}, {{0, 0.25}});
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(check_constraints(random_feasible_design(space, 50, rng), space).feasible);
}

TEST_CASE("maximin search improves the minimum distance") {
  const DesignSpace space({{0.0, 1.0}, {0.0, 1.0}});
  const Design best = maximin_lhd(space, 12, 50, 3);
  const Design single = Design::from_points(latin_hypercube(space, 12, derive_seed(3, "maximin", 0)));
  CHECK(min_pairwise_distance(best, space) >= min_pairwise_distance(single, space));
}

TEST_CASE("design csv round trips exactly") {
  Design d(3, 2);
  d(0, 0) = 0.1;
  d(0, 1) = 1.0 / 3.0;
  d(1, 0) = 1e-17;
  d(1, 1) = 200.0;
  d(2, 0) = -7.25;
  d(2, 1) = std::nextafter(1.0, 2.0);
  std::stringstream buf;
  write_design_csv(buf, d);
  CHECK(buf.str().rfind("# design n=3 w=2", 0) == 0);
  CHECK(read_design_csv(buf) == d);
}
