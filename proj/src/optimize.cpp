#include "auxdesign/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace auxdesign {

namespace {

Vector project(const Vector& x, const Vector& lo, const Vector& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

struct Counted {
  const Objective& f;
  int calls = 0;
  double operator()(const Vector& x) {
    ++calls;
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  }
};

Vector fd_gradient(Counted& f, const Vector& x, double fx, const Vector& lo, const Vector& hi,
                   double rel_step) {
  const Eigen::Index n = x.size();
  Vector g(n);
  Vector probe = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = rel_step * (1.0 + std::abs(x[i]));
    const double up = std::min(hi[i], x[i] + h);
    const double dn = std::max(lo[i], x[i] - h);
    double fu = fx, fd = fx;
    if (up > x[i]) {
      probe[i] = up;
      fu = f(probe);
    }
    if (dn < x[i]) {
      probe[i] = dn;
      fd = f(probe);
    }
    probe[i] = x[i];
    const double width = up - dn;
    if (width <= 0.0 || !std::isfinite(fu) || !std::isfinite(fd)) {
      // Fall back to the finite side.
      if (std::isfinite(fu) && up > x[i])
        g[i] = (fu - fx) / (up - x[i]);
      else if (std::isfinite(fd) && dn < x[i])
        g[i] = (fx - fd) / (x[i] - dn);
      else
        g[i] = 0.0;
    } else {
      g[i] = (fu - fd) / width;
    }
  }
  return g;
}

double projected_gradient_norm(const Vector& x, const Vector& g, const Vector& lo,
                               const Vector& hi) {
  return (project(x - g, lo, hi) - x).lpNorm<Eigen::Infinity>();
}

}  // namespace

MinimizeResult minimize_box(const Objective& objective, Vector x0, const Vector& lower,
                            const Vector& upper, const MinimizeOptions& options) {
  Counted f{objective};
  const Eigen::Index n = x0.size();
  MinimizeResult result;
  Vector x = project(x0, lower, upper);
  double fx = f(x);
  result.x = x;
  result.value = fx;
  if (!std::isfinite(fx)) {
    result.evaluations = f.calls;
    return result;
  }
  Vector g = fd_gradient(f, x, fx, lower, upper, options.fd_step);
  Matrix H = Matrix::Identity(n, n);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const double pg = projected_gradient_norm(x, g, lower, upper);
    result.projected_gradient = pg / (1.0 + std::abs(fx));
    if (result.projected_gradient < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<bool> active(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eps = 1e-12 * (1.0 + std::abs(x[i]));
      active[i] = (x[i] <= lower[i] + eps && g[i] > 0.0) || (x[i] >= upper[i] - eps && g[i] < 0.0);
    }
    Vector p = -(H * g);
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i]) p[i] = 0.0;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      H.setIdentity();
      p = -g;
      for (Eigen::Index i = 0; i < n; ++i)
        if (active[i]) p[i] = 0.0;
      slope = g.dot(p);
      if (!(slope < 0.0)) {
        result.converged = true;
        break;
      }
    }
    // Backtracking Armijo line search on the projected path.
    double alpha = 1.0;
    Vector x_new = x;
    double f_new = kInf;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + alpha * p, lower, upper);
      f_new = f(x_new);
      if (f_new <= fx + 1e-4 * g.dot(x_new - x)) {
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved || (x_new - x).lpNorm<Eigen::Infinity>() == 0.0) {
      if (H.isIdentity()) {
        result.converged = result.projected_gradient < 1e2 * options.gradient_tolerance;
        break;
      }
      H.setIdentity();
      continue;
    }
    const Vector g_new = fd_gradient(f, x_new, f_new, lower, upper, options.fd_step);
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    const bool stalled = std::abs(fx - f_new) <= 1e-14 * (1.0 + std::abs(fx));
    x = x_new;
    fx = f_new;
    g = g_new;
    if (stalled) {
      result.projected_gradient =
          projected_gradient_norm(x, g, lower, upper) / (1.0 + std::abs(fx));
      result.converged = result.projected_gradient < 1e2 * options.gradient_tolerance;
      break;
    }
  }
  result.x = x;
  result.value = fx;
  result.evaluations = f.calls;
  return result;
}

double golden_section_maximize(const std::function<double(double)>& f, double a, double b,
                               double tolerance, double* best) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double a0 = a, b0 = b;
  auto eval = [&](double x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kNegInf;
  };
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(c), fd = eval(d);
  while (b - a > tolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
  // Endpoints are admissible maxima too (e.g. the Gaussian limit of a copula).
  double x = fc >= fd ? c : d;
  double fx = std::max(fc, fd);
  for (double end : {a0, b0}) {
    const double fe = eval(end);
    if (fe > fx) {
      fx = fe;
      x = end;
    }
  }
  if (best) *best = fx;
  return x;
}

}  // namespace auxdesign
