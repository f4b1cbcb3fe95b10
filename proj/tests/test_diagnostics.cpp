#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "auxdesign/diagnostics.hpp"

using namespace auxdesign;

namespace {

// y ~ N(theta d, 1): the normal family matches both the conditional and the
// marginal N(0, 1 + d^2) exactly.
struct Toy {
  ModelPtr model;
  Prior prior;
  DesignSpace space;
};

Toy toy() {
  auto model = std::make_shared<DirectModel>("toy", 1, 1, [](const Vector& th, std::span<const double> d, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    return th[0] * d[0] + z(rng);
  });
  return {model, Prior({Prior::multivariate_normal({0}, Vector{{0.0}}, Matrix{{1.0}})}), DesignSpace({{0.0, 2.0}})};
}

AuxBuildOptions options() {
  AuxBuildOptions o;
  o.M = 60;
  o.N = 2000;
  o.seed = 17;
  o.mgp_multistarts = 4;
  return o;
}

const ConditionalAux& toy_conditional() {
  static const ConditionalAux c = [] {
    const Toy t = toy();
    return build_conditional(t.model, t.prior, t.space, AuxiliaryFamily::from_name("normal"), options());
  }();
  return c;
}

const MarginalAux& toy_marginal() {
  static const MarginalAux m = [] {
    const Toy t = toy();
    return build_marginal(t.model, t.prior, t.space, AuxiliaryFamily::from_name("normal"), options());
  }();
  return m;
}

}  // namespace

TEST_CASE("predictive p-value counting") {
  const std::vector<double> a{1.0, 2.0, 3.0, 4.0}, b{2.0, 2.0, 1.0, 5.0};
  CHECK(predictive_pvalue(a, b, Direction::Less, false) == 0.5);
  CHECK(predictive_pvalue(a, b, Direction::Less, true) == 0.625);
  CHECK(predictive_pvalue(a, b, Direction::Greater, false) == 0.25);
  CHECK(predictive_pvalue(a, b, Direction::Greater, true) == 0.375);
  CHECK(predictive_pvalue(a, a, Direction::Less, true) == 0.5);
  CHECK(predictive_pvalue(a, a, Direction::Less, false) == 0.0);
  CHECK_THROWS_AS(predictive_pvalue(a, std::vector<double>{1.0}, Direction::Less, false), Error);

  AdequacyReport r;
  r.p_value = 0.01;
  CHECK_FALSE(r.adequate());
  r.p_value = 0.5;
  CHECK(r.adequate());
  r.p_value = 0.99;
  CHECK_FALSE(r.adequate());
}

TEST_CASE("oracle swap gives a centred p-value") {
  double total = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng = make_rng(s, "swap");
    std::gamma_distribution<double> g(3.0, 1.0);
    std::vector<double> a(100), b(100);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    total += predictive_pvalue(a, b, Direction::Less, false);
  }
  const double mean = total / 50.0;
  CHECK(mean >= 0.4);
  CHECK(mean <= 0.6);
}

TEST_CASE("slope through the origin") {
  const std::vector<double> x{1.0, 2.0, 3.0}, y{2.0, 4.0, 6.0};
  CHECK(slope_through_origin(x, y) == doctest::Approx(2.0));
}

TEST_CASE("conditional check passes an exactly matching family") {
  const Toy t = toy();
  const AdequacyReport r = assess_conditional(toy_conditional(), t.prior, t.space, 100, 500, 3);
  CHECK(r.kind == "conditional");
  CHECK(r.p_value > 0.2);
  CHECK(r.p_value < 0.8);
  CHECK(r.adequate());
  const double slope = slope_through_origin(r.stats.mean_model, r.stats.mean_aux);
  CHECK(slope >= 0.8);
  CHECK(slope <= 1.25);
  CHECK(slope_through_origin(r.stats.var_model, r.stats.var_aux) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("marginal check passes an exactly matching family") {
  const Toy t = toy();
  const AdequacyReport r = assess_marginal(toy_marginal(), t.model, t.prior, t.space, 100, 500, 4);
  CHECK(r.p_value > 0.2);
  CHECK(r.p_value < 0.8);
  CHECK(slope_through_origin(r.stats.var_model, r.stats.var_aux) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("a misspecified variance is flagged") {
  // Data twice as spread as the emulated family: the model sample is always less likely.
  const Toy t = toy();
  auto wide = std::make_shared<DirectModel>("wide", 1, 1, [](const Vector& th, std::span<const double> d, Rng& rng) {
    std::normal_distribution<double> z(0.0, 2.0);
    return th[0] * d[0] + z(rng);
  });
  const AdequacyReport r = assess_marginal(toy_marginal(), wide, t.prior, t.space, 50, 500, 5);
  CHECK(r.p_value > 0.99);
  CHECK_FALSE(r.adequate());
}

TEST_CASE("coupled check on a correlated marginal model") {
  const Toy t = toy();
  const AdequacyReport r = assess_coupled(toy_marginal(), t.model, t.prior, t.space, 100, 200, 3, 6);
  CHECK(r.kind == "coupled");
  CHECK(r.N == 3);
  CHECK(r.p_value > 0.2);
  CHECK(r.p_value < 0.8);
  for (std::size_t i = 0; i < r.M0; ++i) {
    CHECK(std::isfinite(r.loglik_model[i]));
    CHECK(std::isfinite(r.loglik_aux[i]));
  }
}

TEST_CASE("reports are deterministic and thread-count independent") {
  const Toy t = toy();
  set_thread_count(1);
  const AdequacyReport a = assess_conditional(toy_conditional(), t.prior, t.space, 20, 100, 9);
  const AdequacyReport c = assess_coupled(toy_marginal(), t.model, t.prior, t.space, 10, 100, 2, 9);
  set_thread_count(4);
  const AdequacyReport b = assess_conditional(toy_conditional(), t.prior, t.space, 20, 100, 9);
  const AdequacyReport d = assess_coupled(toy_marginal(), t.model, t.prior, t.space, 10, 100, 2, 9);
  set_thread_count(1);
  CHECK(a.loglik_model == b.loglik_model);
  CHECK(a.loglik_aux == b.loglik_aux);
  CHECK(c.loglik_aux == d.loglik_aux);
  CHECK(a.p_value == b.p_value);
}

TEST_CASE("model-set marginal check") {
  AuxBuildOptions o;
  o.M = 40;
  o.N = 300;
  o.seed = 2;
  o.mgp_multistarts = 4;
  const ModelSet set = make_model_set({"epi_si"});
  const MarginalAux marg = build_marginal(set, AuxiliaryFamily::from_name("betabinomial"), o);
  const AdequacyReport r = assess_marginal(marg, set, 30, 200, 1);
  CHECK(r.M0 == 30);
  CHECK(r.p_value >= 0.0);
  CHECK(r.p_value <= 1.0);
}

TEST_CASE("report artifacts") {
  const Toy t = toy();
  const AdequacyReport r = assess_conditional(toy_conditional(), t.prior, t.space, 5, 50, 1);
  std::ostringstream csv;
  write_adequacy_csv(csv, r);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "i,mean_model,mean_aux,var_model,var_aux,median_model,median_aux,loglik_model,loglik_aux");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
  const auto j = nlohmann::json::parse(adequacy_summary_json(r));
  CHECK(j["kind"] == "conditional");
  CHECK(j["p_value"].get<double>() == r.p_value);
  CHECK(j["adequate"].get<bool>() == r.adequate());
  CHECK(j["N"].get<int>() == 50);
}
