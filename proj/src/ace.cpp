#include "auxdesign/ace.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "auxdesign/format.hpp"
#include "auxdesign/mgp.hpp"

namespace auxdesign {

namespace {

double mean_of(std::span<const double> u) {
  double s = 0.0;
  for (double v : u) s += v;
  return s / static_cast<double>(u.size());
}

double beta_draw(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

}  // namespace

AcceptanceMode acceptance_from_name(std::string_view name) {
  if (name == "normal") return AcceptanceMode::Normal;
  if (name == "binary") return AcceptanceMode::Binary;
  throw ConfigError("unknown acceptance mode '" + std::string(name) + "'");
}

std::string acceptance_name(AcceptanceMode mode) {
  return mode == AcceptanceMode::Normal ? "normal" : "binary";
}

void AceConfig::validate() const {
  if (Q < 4) throw ConfigError("ace: Q must be at least 4");
  if (B_fit == 0 || B_test == 0 || iterations == 0 || restarts == 0 || B_final == 0)
    throw ConfigError("ace: all counts must be positive");
}

double acceptance_normal(std::span<const double> uc, std::span<const double> us) {
  if (uc.size() != us.size() || uc.empty()) throw Error("acceptance_normal: samples must have equal positive size");
  const auto B = static_cast<double>(uc.size());
  const double mc = mean_of(uc), ms = mean_of(us);
  double ss = 0.0;
  for (double v : uc) ss += (v - mc) * (v - mc);
  for (double v : us) ss += (v - ms) * (v - ms);
  const double vhat = uc.size() > 1 ? ss / (2.0 * B - 2.0) : 0.0;
  if (!(vhat > 0.0) || !std::isfinite(vhat)) {
    if (ms > mc) return 1.0;
    if (ms == mc) return 0.5;
    return 0.0;
  }
  const boost::math::students_t_distribution<double> t(2.0 * B - 2.0);
  const double stat = -(B * ms - B * mc) / std::sqrt(2.0 * B * vhat);
  return 1.0 - boost::math::cdf(t, stat);
}

double acceptance_binary(std::span<const double> uc, std::span<const double> us, Rng& rng) {
  if (uc.size() != us.size() || uc.empty()) throw Error("acceptance_binary: samples must have equal positive size");
  const auto B = static_cast<double>(uc.size());
  const double sc = B * mean_of(uc), ss = B * mean_of(us);
  const double a_star = 1.0 + ss, b_star = 1.0 + B - ss;
  double total = 0.0;
  for (std::size_t b = 0; b < uc.size(); ++b) {
    const double rho = beta_draw(1.0 + sc, 1.0 + B - sc, rng);
    total += boost::math::ibeta(a_star, b_star, rho);
  }
  return std::clamp(1.0 - total / B, 0.0, 1.0);
}

AceResult ace_optimize(const UtilitySampler& utility, const DesignSpace& space, std::size_t n,
                       const AceConfig& config, std::uint64_t seed, const std::vector<Design>& initial) {
  config.validate();
  if (n == 0) throw ConfigError("ace: n must be positive");
  if (!initial.empty() && initial.size() != config.restarts)
    throw ConfigError("ace: one initial design per restart is required");
  const std::size_t w = space.w();
  AceResult result;
  AceTrace& trace = result.trace;

  const auto mean_utility = [&](const Design& D, std::size_t B, std::uint64_t s) {
    const std::vector<double> u = utility(D, B, s);
    return std::pair{mean_of(u), u};
  };

  for (std::size_t r = 0; r < config.restarts; ++r) {
    const std::uint64_t sr = derive_seed(seed, "restart", r);
    Rng init = make_rng(sr, "init");
    Design D = initial.empty() ? random_feasible_design(space, n, init) : initial[r];
    if (D.n() != n || D.w() != w) throw ConfigError("ace: initial design has the wrong shape");
    if (!check_constraints(D, space).feasible) throw ConfigError("ace: initial design is infeasible");
    Rng accept = make_rng(sr, "accept");
    double current_estimate = kNegInf;
    std::uint64_t step = 0;

    for (std::size_t it = 0; it < config.iterations; ++it) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t c = 0; c < w; ++c, ++step) {
          AceStep rec{r, it, k, c, D(k, c), D(k, c), kNaN, 0.0, false, {}};
          const Interval bound = space.bound(c);

          std::vector<double> xs, zs;
          for (std::size_t j = 0; j < config.Q; ++j) {
            const double raw = j + 1 < config.Q
                                   ? bound.lo + bound.width() * static_cast<double>(j) / static_cast<double>(config.Q - 2)
                                   : D(k, c);
            double x = 0.0;
            if (!project_coordinate(D, space, k, c, raw, x)) continue;
            Design trial = D;
            trial(k, c) = x;
            const double z = mean_utility(trial, config.B_fit, derive_seed(sr, "fit", step * config.Q + j)).first;
            if (!std::isfinite(z)) continue;
            xs.push_back(x);
            zs.push_back(z);
          }
          if (xs.size() < 3) {
            rec.note = "too few feasible evaluations";
            trace.steps.push_back(rec);
            continue;
          }

          double best_x = D(k, c), best_z = kNegInf;
          try {
            Matrix X(static_cast<Eigen::Index>(xs.size()), 1), Z(static_cast<Eigen::Index>(xs.size()), 1);
            for (std::size_t j = 0; j < xs.size(); ++j) {
              X(static_cast<Eigen::Index>(j), 0) = xs[j];
              Z(static_cast<Eigen::Index>(j), 0) = zs[j];
            }
            MgpOptions mo;
            mo.input_lo = Vector::Constant(1, bound.lo);
            mo.input_hi = Vector::Constant(1, bound.hi);
            mo.seed = derive_seed(sr, "gp", step);
            const MgpFit gp = MgpFit::fit(X, Z, mo);
            constexpr int kGrid = 1000;
            for (int g = 0; g < kGrid; ++g) {
              const double x = bound.lo + bound.width() * g / (kGrid - 1.0);
              const double z = gp.predict_mean(std::span<const double>(&x, 1))[0];
              if (z > best_z) best_z = z, best_x = x;
            }
          } catch (const FitError& err) {
            rec.note = std::string("gp fit failed: ") + err.what();
            trace.steps.push_back(rec);
            continue;
          }
          rec.emulated_max = best_z;
          double proposed = 0.0;
          if (!project_coordinate(D, space, k, c, best_x, proposed)) {
            rec.note = "no feasible value";
            trace.steps.push_back(rec);
            continue;
          }
          rec.proposed = proposed;
          if (proposed == D(k, c)) {
            rec.note = "no move";
            trace.steps.push_back(rec);
            continue;
          }

          Design candidate = D;
          candidate(k, c) = proposed;
          const auto [mc, uc] = mean_utility(D, config.B_test, derive_seed(sr, "test-current", step));
          const auto [ms, us] = mean_utility(candidate, config.B_test, derive_seed(sr, "test-proposed", step));
          rec.p_star = config.acceptance == AcceptanceMode::Normal ? acceptance_normal(uc, us)
                                                                   : acceptance_binary(uc, us, accept);
          std::uniform_real_distribution<double> unif(0.0, 1.0);
          rec.accepted = unif(accept) < rec.p_star;
          if (rec.accepted) {
            D = candidate;
            current_estimate = ms;
          } else {
            current_estimate = mc;
          }
          trace.steps.push_back(rec);
        }
      }
      trace.iterations.push_back({r, it, D, current_estimate});
    }
    trace.restart_designs.push_back(D);
  }

  const std::uint64_t final_seed = derive_seed(seed, "final");
  for (const Design& D : trace.restart_designs)
    trace.final_estimates.push_back(mean_utility(D, config.B_final, final_seed).first);
  for (std::size_t r = 1; r < trace.final_estimates.size(); ++r)
    if (trace.final_estimates[r] > trace.final_estimates[trace.best_restart]) trace.best_restart = r;
  result.best = trace.restart_designs[trace.best_restart];
  result.best_estimate = trace.final_estimates[trace.best_restart];
  return result;
}

void write_ace_trace_csv(std::ostream& out, const AceTrace& trace) {
  out << "restart,iteration,run,coord,current,proposed,emulated_max,p_star,accepted,note\n";
  for (const AceStep& s : trace.steps) {
    out << s.restart << ',' << s.iteration << ',' << s.run << ',' << s.coord << ',' << fmt17(s.current) << ','
        << fmt17(s.proposed) << ',' << fmt17(s.emulated_max) << ',' << fmt17(s.p_star) << ','
        << (s.accepted ? 1 : 0) << ',' << '"' << s.note << '"' << '\n';
  }
}

}  // namespace auxdesign
