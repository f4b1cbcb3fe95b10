#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "auxdesign/coupled.hpp"

using namespace auxdesign;

namespace {

AuxBuildOptions small(std::size_t M, std::size_t N, std::uint64_t seed) {
  AuxBuildOptions o;
  o.M = M;
  o.N = N;
  o.seed = seed;
  o.mgp_multistarts = 4;
  return o;
}

Design grid(const DesignSpace& space, std::size_t n) { return equally_spaced(space, n); }

double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double L = static_cast<double>(u.size());
  double ks = 0.0;
  for (std::size_t l = 0; l < u.size(); ++l)
    ks = std::max({ks, std::abs(u[l] - l / L), std::abs(u[l] - (l + 1) / L)});
  return ks;
}

}  // namespace

TEST_CASE("conditional emulator tracks the compartmental mean and variance") {
  const ModelSpec spec = make_model("compartmental");
  const auto fam = AuxiliaryFamily::from_name("normal");
  const ConditionalAux aux = build_conditional(spec.model, spec.prior, spec.space, fam, small(300, 2000, 1));
  CHECK(aux.stats.failed == 0);
  Rng rng(5);
  std::uniform_real_distribution<double> time(0.5, 23.5);
  double sq_mean = 0.0, sq_sd = 0.0;
  for (int k = 0; k < 40; ++k) {
    const Vector theta = spec.prior.sample(rng);
    const std::vector<double> d{time(rng)};
    const AuxParams p = aux.phi(theta, d);
    const double mu = compartmental_mean(theta, d[0]);
    const double sd = std::sqrt(compartmental_variance(theta, d[0]));
    sq_mean += std::pow((p.phi[0] - mu) / sd, 2);
    sq_sd += std::pow(std::sqrt(p.phi[1]) / sd - 1.0, 2);
  }
  // Root-mean-square errors in units of the true standard deviation.
  CHECK(std::sqrt(sq_mean / 40) < 0.5);
  CHECK(std::sqrt(sq_sd / 40) < 0.1);
}

TEST_CASE("auxiliary likelihood sums per-run densities") {
  const ModelSpec spec = make_model("compartmental");
  const auto fam = AuxiliaryFamily::from_name("normal");
  const ConditionalAux aux = build_conditional(spec.model, spec.prior, spec.space, fam, small(30, 300, 2));
  const Design D = grid(spec.space, 4);
  const Vector theta = Vector{{0.1, 1.0, 20.0}};
  const std::vector<double> y{0.0, 5.0, 4.0, 3.0};
  double expect = 0.0;
  for (std::size_t k = 0; k < 4; ++k) expect += aux.log_density(y[k], theta, D.row(k));
  CHECK(aux.loglik(y, theta, D) == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(aux.loglik(std::vector<double>{1.0}, theta, D), Error);
}

TEST_CASE("builds are reproducible and survive a save and load") {
  const ModelSpec spec = make_model("compartmental");
  const auto fam = AuxiliaryFamily::from_name("normal");
  const auto o = small(25, 200, 33);
  set_thread_count(1);
  const MarginalAux a = build_marginal(spec.model, spec.prior, spec.space, fam, o);
  set_thread_count(3);
  const MarginalAux b = build_marginal(spec.model, spec.prior, spec.space, fam, o);
  set_thread_count(1);
  CHECK((a.emulator().outputs() - b.emulator().outputs()).norm() == 0.0);
  CHECK((a.emulator().kernel().rho - b.emulator().kernel().rho).norm() == 0.0);

  const auto path = (std::filesystem::temp_directory_path() / "auxdesign_marginal_test.mgp").string();
  a.save(path);
  const MarginalAux c = MarginalAux::load(path, spec.model);
  std::filesystem::remove(path);
  CHECK(c.family().name() == "normal");
  CHECK(c.stats.rows == 25);
  for (double t : {0.3, 7.0, 19.5}) {
    const std::vector<double> d{t};
    CHECK((a.phi(d).phi - c.phi(d).phi).norm() == 0.0);
  }
}

TEST_CASE("randomized PIT of discrete data is uniform") {
  const auto fam = AuxiliaryFamily::from_name("negbin");
  const ModelSpec spec = make_model("aphid");
  // Any emulator will do; phi is supplied directly.
  Matrix X(4, 1), Z(4, 2);
  X << 0.0, 10.0, 20.0, 30.0;
  Z.col(0).setConstant(std::log(6.0));
  Z.col(1).setConstant(std::log(2.0));
  const MarginalAux marg(fam, MgpFit::assemble(X, Z, Kernel{KernelKind::SE, Vector{{1.0}}, 1e-4}, Vector(), Vector()),
                         spec.model, 1);
  const AuxParams phi = fam.from_phi(Vector{{6.0, 2.0}});
  Rng rng(4);
  std::vector<double> u(5000), mid(5000);
  for (std::size_t l = 0; l < u.size(); ++l) {
    const double y = fam.sample(phi.phi, 0, rng);
    u[l] = marg.pit_random(y, phi, 0, rng);
    mid[l] = marg.pit_mid(y, phi, 0);
  }
  CHECK(ks_uniform(u) < 1.63 / std::sqrt(5000.0));
  // Mid-PIT is discrete: its KS distance is bounded below by the largest atom.
  CHECK(ks_uniform(mid) > 0.02);
}

TEST_CASE("copula from simulations and coupled draws") {
  const ModelSpec spec = make_model("compartmental");
  const auto fam = AuxiliaryFamily::from_name("normal");
  const MarginalAux marg = build_marginal(spec.model, spec.prior, spec.space, fam, small(60, 2000, 7));
  const Design D = grid(spec.space, 4);
  CopulaFitReport rep;
  const TCopula cop = fit_copula(marg, marginal_sampler(spec.model, spec.prior), D, 400, 11, 0, &rep);
  CHECK(cop.dim() == 4);
  // Responses at t > 0 share theta, so they are positively dependent.
  CHECK(cop.R()(1, 2) > 0.3);
  CHECK(cop.R()(2, 3) > 0.3);

  Rng rng(19);
  const std::vector<double> y = marginal_sampler(spec.model, spec.prior)(D, rng);
  const double ll = aux_marginal_loglik(marg, cop, y, D);
  CHECK(std::isfinite(ll));
  const double ll_paper = aux_marginal_loglik(marg, cop, y, D, 0, CopulaDensity::Paper);
  CHECK(std::isfinite(ll_paper));

  const std::vector<double> draw = sample_coupled(marg, spec.model, spec.prior, D, 50, 3);
  CHECK(draw.size() == 4);
  for (double v : draw) CHECK(std::isfinite(v));
  CHECK(draw == sample_coupled(marg, spec.model, spec.prior, D, 50, 3));
}

TEST_CASE("a single-run design has a flat copula") {
  const ModelSpec spec = make_model("compartmental");
  const auto fam = AuxiliaryFamily::from_name("normal");
  const MarginalAux marg = build_marginal(spec.model, spec.prior, spec.space, fam, small(20, 200, 8));
  Design D(1, 1);
  D(0, 0) = 4.0;
  const TCopula cop = fit_copula(marg, marginal_sampler(spec.model, spec.prior), D, 3, 1);
  const std::vector<double> y{2.0};
  CHECK(aux_marginal_loglik(marg, cop, y, D) == doctest::Approx(marg.log_density(2.0, D.row(0))));
}

TEST_CASE("model-indexed marginal uses the categorical kernel") {
  ModelSet set = make_model_set({"epi_death", "epi_si"});
  const auto fam = AuxiliaryFamily::from_name("betabinomial");
  const MarginalAux marg = build_marginal(set, fam, small(40, 300, 12));
  CHECK(marg.by_model());
  CHECK(marg.models() == 2);
  CHECK(marg.emulator().kernel().kind == KernelKind::SEE);
  CHECK(marg.emulator().input_dim() == 2);
  const std::vector<double> d{5.0};
  CHECK(std::isfinite(marg.log_density(10.0, d, 1)));
  CHECK_THROWS_AS(marg.phi(d, 2), Error);
}

TEST_CASE("an inadequate family aborts the build") {
  const ModelSpec spec = make_model("compartmental");
  // Normal responses near zero are not counts.
  const auto fam = AuxiliaryFamily::from_name("poisson");
  CHECK_THROWS_AS(build_conditional(spec.model, spec.prior, spec.space, fam, small(20, 100, 3)), FitError);
}
