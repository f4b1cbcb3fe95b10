#pragma once

#include <functional>

#include "auxdesign/core.hpp"

namespace auxdesign {

using Objective = std::function<double(const Vector&)>;

struct MinimizeOptions {
  int max_iterations = 200;
  /// Stop when the projected gradient, scaled by 1 + |f|, falls below this.
  double gradient_tolerance = 1e-6;
  /// Relative finite-difference step.
  double fd_step = 1e-5;
};

struct MinimizeResult {
  Vector x;
  double value = kInf;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double projected_gradient = kInf;
};

/// Bounded quasi-Newton (projected BFGS with Armijo backtracking) using
/// central finite-difference gradients. Non-finite objective values are
/// treated as +inf, so infeasible candidates are simply stepped away from.
MinimizeResult minimize_box(const Objective& f, Vector x0, const Vector& lower,
                            const Vector& upper, const MinimizeOptions& options = {});

/// Golden-section search for the maximum of a unimodal f on [a, b].
/// Returns the abscissa; the objective value is written to *best when given.
double golden_section_maximize(const std::function<double(double)>& f, double a, double b,
                               double tolerance, double* best = nullptr);

}  // namespace auxdesign
