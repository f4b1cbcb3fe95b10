#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "auxdesign/design_space.hpp"

namespace auxdesign {

enum class AcceptanceMode { Normal, Binary };

AcceptanceMode acceptance_from_name(std::string_view name);
std::string acceptance_name(AcceptanceMode mode);

struct AceConfig {
  std::size_t Q = 20;
  std::size_t B_fit = 1000;
  std::size_t B_test = 20000;
  std::size_t iterations = 20;
  std::size_t restarts = 20;
  /// Outer size of the common-seed evaluation that picks the restart winner.
  std::size_t B_final = 20000;
  AcceptanceMode acceptance = AcceptanceMode::Normal;

  void validate() const;
};

/// Per-sample utilities u_1..u_B of one Monte Carlo evaluation at D.
using UtilitySampler = std::function<std::vector<double>(const Design& D, std::size_t B, std::uint64_t seed)>;

struct AceStep {
  std::size_t restart = 0;
  std::size_t iteration = 0;
  std::size_t run = 0;
  std::size_t coord = 0;
  double current = 0.0;
  double proposed = 0.0;
  double emulated_max = 0.0;
  double p_star = 0.0;
  bool accepted = false;
  /// Set when the coordinate was skipped (no feasible value, GP failure, no move).
  std::string note;
};

struct AceIteration {
  std::size_t restart = 0;
  std::size_t iteration = 0;
  Design design;
  /// Test-phase mean utility of the design that is current after the sweep.
  double test_estimate = 0.0;
};

struct AceTrace {
  std::vector<AceStep> steps;
  std::vector<AceIteration> iterations;
  std::vector<Design> restart_designs;
  std::vector<double> final_estimates;
  std::size_t best_restart = 0;
};

struct AceResult {
  Design best;
  double best_estimate = 0.0;
  AceTrace trace;
};

/// p* = 1 - F_{2B-2}(-(B u*_bar - B uC_bar) / sqrt(2 B v)), v the pooled variance.
/// Zero variance: 1 if u*_bar > uC_bar, 0.5 if equal, else 0.
double acceptance_normal(std::span<const double> u_current, std::span<const double> u_proposed);

/// p* = 1 - (1/B) sum_b F_Beta(rho_b; 1 + B u*_bar, 1 + B - B u*_bar),
/// rho_b ~ Beta(1 + B uC_bar, 1 + B - B uC_bar).
double acceptance_binary(std::span<const double> u_current, std::span<const double> u_proposed, Rng& rng);

/// Approximate coordinate exchange over designs with n runs. `initial`, when
/// given, supplies one starting design per restart.
AceResult ace_optimize(const UtilitySampler& utility, const DesignSpace& space, std::size_t n,
                       const AceConfig& config, std::uint64_t seed, const std::vector<Design>& initial = {});

/// One row per coordinate step.
void write_ace_trace_csv(std::ostream& out, const AceTrace& trace);

}  // namespace auxdesign
