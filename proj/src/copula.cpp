#include "auxdesign/copula.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>

#include "auxdesign/optimize.hpp"

namespace auxdesign {

namespace {

constexpr double kUClamp = 1e-12;
constexpr double kIndependentDelta = 1e6;

double clamp_u(double u) { return std::clamp(u, kUClamp, 1.0 - kUClamp); }

Matrix quantiles(const Matrix& U, double delta) {
  const boost::math::students_t_distribution<double> t(delta);
  Matrix V(U.rows(), U.cols());
  for (Eigen::Index i = 0; i < U.rows(); ++i)
    for (Eigen::Index k = 0; k < U.cols(); ++k) V(i, k) = boost::math::quantile(t, clamp_u(U(i, k)));
  return V;
}

bool is_pd(const Matrix& R) {
  Eigen::LLT<Matrix> llt(R);
  return llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 1e-8;
}

}  // namespace

TCopula::TCopula(Matrix R, double delta) : R_(std::move(R)), delta_(delta) {
  if (R_.rows() == 0 || R_.rows() != R_.cols()) throw FitError("copula: R must be square");
  if (!(delta_ > 0.0)) throw FitError("copula: degrees of freedom must be positive");
  if ((R_.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
    throw FitError("copula: R must have a unit diagonal");
  Eigen::LLT<Matrix> llt(R_);
  if (llt.info() != Eigen::Success) throw FitError("copula: R is not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  independent_ = delta_ >= kIndependentDelta && R_.isIdentity(0.0);
}

Vector TCopula::whiten(const Vector& v) const {
  return chol_.triangularView<Eigen::Lower>().solve(v);
}

double copula_logdensity_from_quantiles(const TCopula& copula, const Vector& v, CopulaDensity mode) {
  const auto n = static_cast<double>(v.size());
  if (v.size() == 1) return 0.0;
  const double delta = copula.delta();
  const double q = copula.whiten(v).squaredNorm();
  if (mode == CopulaDensity::Paper) {
    return -0.5 * copula.log_det() +
           0.5 * (delta + n) * (std::log(delta + v.squaredNorm()) - std::log(delta + q));
  }
  double marg = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) marg += std::log1p(v[k] * v[k] / delta);
  return std::lgamma(0.5 * (delta + n)) + (n - 1.0) * std::lgamma(0.5 * delta) -
         n * std::lgamma(0.5 * (delta + 1.0)) - 0.5 * copula.log_det() -
         0.5 * (delta + n) * std::log1p(q / delta) + 0.5 * (delta + 1.0) * marg;
}

double copula_logdensity(const TCopula& copula, std::span<const double> u, CopulaDensity mode) {
  if (u.size() != copula.dim()) throw Error("copula: dimension mismatch");
  if (u.size() == 1) return 0.0;
  const boost::math::students_t_distribution<double> t(copula.delta());
  Vector v(static_cast<Eigen::Index>(u.size()));
  for (std::size_t k = 0; k < u.size(); ++k)
    v[static_cast<Eigen::Index>(k)] = boost::math::quantile(t, clamp_u(u[k]));
  return copula_logdensity_from_quantiles(copula, v, mode);
}

Matrix kendall_tau(const Matrix& U) {
  const Eigen::Index L = U.rows(), n = U.cols();
  Matrix tau = Matrix::Identity(n, n);
  if (L < 2) return tau;
  // Pairwise order signs per column, packed over l < l'.
  const Eigen::Index pairs = L * (L - 1) / 2;
  Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic> S(pairs, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = 0;
    for (Eigen::Index a = 0; a < L; ++a)
      for (Eigen::Index b = a + 1; b < L; ++b, ++p) {
        const double diff = U(a, k) - U(b, k);
        S(p, k) = static_cast<signed char>((diff > 0.0) - (diff < 0.0));
      }
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j + 1; k < n; ++k) {
      long acc = 0;
      for (Eigen::Index p = 0; p < pairs; ++p) acc += S(p, j) * S(p, k);
      tau(j, k) = tau(k, j) = static_cast<double>(acc) / static_cast<double>(pairs);
    }
  return tau;
}

Matrix nearest_correlation(const Matrix& A, double eig_floor, int max_iterations) {
  const Eigen::Index n = A.rows();
  Matrix Y = A, dS = Matrix::Zero(n, n), X = A;
  for (int it = 0; it < max_iterations; ++it) {
    const Matrix R = Y - dS;
    Eigen::SelfAdjointEigenSolver<Matrix> es(R);
    const Vector lam = es.eigenvalues().cwiseMax(eig_floor);
    X = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    dS = X - R;
    const Matrix Yprev = Y;
    Y = X;
    Y.diagonal().setOnes();
    if ((Y - Yprev).norm() <= 1e-10 * std::max(1.0, Y.norm())) break;
  }
  // Final floor so the result is strictly positive definite with unit diagonal.
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Y + Y.transpose()));
  const Vector lam = es.eigenvalues().cwiseMax(eig_floor);
  Matrix out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  const Vector s = out.diagonal().cwiseSqrt().cwiseInverse();
  out = s.asDiagonal() * out * s.asDiagonal();
  out.diagonal().setOnes();
  return 0.5 * (out + out.transpose());
}

TCopula fit_tcopula(const Matrix& U, CopulaFitReport* report) {
  const Eigen::Index L = U.rows(), n = U.cols();
  if (n == 0) throw FitError("copula: no coordinates");
  CopulaFitReport rep;
  if (n == 1) {
    rep.loglik = 0.0;
    if (report) *report = rep;
    return TCopula(Matrix::Identity(1, 1), kDeltaMax);
  }
  if (L < n + 2) throw FitError("copula: need at least n + 2 training vectors");

  const Matrix tau = kendall_tau(U);
  Matrix R = Matrix::Identity(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j + 1; k < n; ++k)
      R(j, k) = R(k, j) = std::clamp(std::sin(0.5 * std::numbers::pi * tau(j, k)),
                                     -kMaxAbsCorrelation, kMaxAbsCorrelation);
  if (!is_pd(R)) {
    rep.projected = true;
    Matrix P = nearest_correlation(R);
    if (is_pd(P) && P.allFinite()) {
      R = P;
    } else {
      double eps = 1e-6;
      Matrix shrunk = R;
      while (eps < 1.0) {
        shrunk = (1.0 - eps) * R + eps * Matrix::Identity(n, n);
        if (is_pd(shrunk)) break;
        eps *= 2.0;
      }
      if (eps >= 1.0) shrunk = Matrix::Identity(n, n), eps = 1.0;
      rep.shrinkage = eps;
      R = shrunk;
    }
  }

  const auto loglik = [&](double log_delta) {
    const TCopula c(R, std::exp(log_delta));
    const Matrix V = quantiles(U, c.delta());
    double total = 0.0;
    for (Eigen::Index l = 0; l < L; ++l)
      total += copula_logdensity_from_quantiles(c, V.row(l).transpose());
    return std::isfinite(total) ? total : kNegInf;
  };
  double best = kNegInf;
  const double log_delta =
      golden_section_maximize(loglik, std::log(kDeltaMin), std::log(kDeltaMax), 1e-2, &best);
  rep.loglik = best;
  if (report) *report = rep;
  return TCopula(R, std::exp(log_delta));
}

Vector sample_tcopula(const TCopula& copula, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(copula.dim());
  Vector u(n);
  if (copula.independent()) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index k = 0; k < n; ++k) u[k] = unif(rng);
    return u;
  }
  std::normal_distribution<double> norm(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index k = 0; k < n; ++k) z[k] = norm(rng);
  z = copula.cholesky() * z;
  std::chi_squared_distribution<double> chi(copula.delta());
  const double scale = std::sqrt(chi(rng) / copula.delta());
  const boost::math::students_t_distribution<double> t(copula.delta());
  for (Eigen::Index k = 0; k < n; ++k) u[k] = boost::math::cdf(t, z[k] / scale);
  return u;
}

}  // namespace auxdesign
