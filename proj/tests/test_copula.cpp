#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "auxdesign/copula.hpp"

using namespace auxdesign;

namespace {

Matrix random_correlation(std::size_t n, Rng& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Matrix A(n, n + 2);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = norm(rng);
  Matrix S = A * A.transpose();
  const Vector s = S.diagonal().cwiseSqrt().cwiseInverse();
  Matrix R = s.asDiagonal() * S * s.asDiagonal();
  R.diagonal().setOnes();
  return R;
}

double gaussian_copula_logdensity(const Matrix& R, const std::vector<double>& u) {
  const boost::math::normal_distribution<double> nd;
  const auto n = static_cast<Eigen::Index>(u.size());
  Vector z(n);
  for (Eigen::Index k = 0; k < n; ++k) z[k] = boost::math::quantile(nd, u[k]);
  const Matrix Q = R.inverse() - Matrix::Identity(n, n);
  return -0.5 * std::log(R.determinant()) - 0.5 * z.dot(Q * z);
}

double log_normalizer(double delta, double n) {
  return std::lgamma(0.5 * (delta + n)) + (n - 1.0) * std::lgamma(0.5 * delta) -
         n * std::lgamma(0.5 * (delta + 1.0));
}

}  // namespace

TEST_CASE("bivariate copula density integrates to one") {
  Rng rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (int rep = 0; rep < 5; ++rep) {
    const double r = -0.9 + 1.8 * unif(rng);
    const double delta = 2.5 + 40.0 * unif(rng);
    Matrix R(2, 2);
    R << 1.0, r, r, 1.0;
    const TCopula c(R, delta);
    // Integrate over t-quantile space: c(T(v1), T(v2)) t(v1) t(v2).
    const boost::math::students_t_distribution<double> t(delta);
    const double inf = std::numeric_limits<double>::infinity();
    const auto inner = [&](double v1) {
      return integrator.integrate([&](double v2) {
        if (std::abs(v1) > 1e30 || std::abs(v2) > 1e30) return 0.0;
        const Vector v{{v1, v2}};
        const double f = std::exp(copula_logdensity_from_quantiles(c, v)) * boost::math::pdf(t, v1) * boost::math::pdf(t, v2);
        return std::isfinite(f) ? f : 0.0;
      }, -inf, inf, 1e-9);
    };
    const double total = integrator.integrate(inner, -inf, inf, 1e-7);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("large degrees of freedom approach the Gaussian copula") {
  Rng rng(3);
  std::uniform_real_distribution<double> unif(0.02, 0.98);
  const Matrix R = random_correlation(4, rng);
  const TCopula c(R, 1e6);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> u(4);
    for (auto& x : u) x = unif(rng);
    const double gauss = std::exp(gaussian_copula_logdensity(R, u));
    const double t = std::exp(copula_logdensity(c, u));
    CHECK(std::abs(t - gauss) < 1e-3 * std::max(1.0, gauss));
  }
}

TEST_CASE("density at the centre is the normalizing constant") {
  Rng rng(8);
  for (std::size_t n : {2u, 3u, 6u}) {
    for (double delta : {2.5, 7.0, 120.0}) {
      const Matrix R = random_correlation(n, rng);
      const TCopula c(R, delta);
      const std::vector<double> u(n, 0.5);
      const double expect = -0.5 * std::log(R.determinant()) + log_normalizer(delta, static_cast<double>(n));
      CHECK(std::abs(copula_logdensity(c, u) - expect) < 1e-10);
    }
  }
}

TEST_CASE("paper density differs from the standard one by the marginal t terms") {
  Rng rng(12);
  const Matrix R = random_correlation(3, rng);
  const TCopula c(R, 6.0);
  const std::vector<double> u{0.5, 0.5, 0.5};
  CHECK(copula_logdensity(c, u, CopulaDensity::Paper) == doctest::Approx(-0.5 * std::log(R.determinant())));
  const TCopula id(Matrix::Identity(3, 3), 6.0);
  const std::vector<double> w{0.1, 0.7, 0.93};
  CHECK(std::abs(copula_logdensity(id, w, CopulaDensity::Paper)) < 1e-12);
}

TEST_CASE("one-dimensional copula is flat") {
  const TCopula c(Matrix::Identity(1, 1), 5.0);
  CHECK(copula_logdensity(c, std::vector<double>{0.01}) == 0.0);
}

TEST_CASE("invalid correlation matrices are rejected") {
  Matrix R(2, 2);
  R << 1.0, 1.5, 1.5, 1.0;
  CHECK_THROWS_AS(TCopula(R, 5.0), FitError);
  R << 2.0, 0.0, 0.0, 1.0;
  CHECK_THROWS_AS(TCopula(R, 5.0), FitError);
}

TEST_CASE("kendall tau matches the pairwise definition") {
  Rng rng(2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix U(25, 3);
  for (Eigen::Index i = 0; i < 25; ++i) {
    U(i, 0) = unif(rng);
    U(i, 1) = 0.6 * U(i, 0) + 0.4 * unif(rng);
    U(i, 2) = unif(rng);
  }
  const Matrix tau = kendall_tau(U);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      if (j == k) continue;
      double conc = 0.0;
      for (int a = 0; a < 25; ++a)
        for (int b = a + 1; b < 25; ++b) {
          const double s = (U(a, j) - U(b, j)) * (U(a, k) - U(b, k));
          conc += (s > 0) - (s < 0);
        }
      CHECK(tau(j, k) == doctest::Approx(conc / 300.0).epsilon(1e-14));
    }
}

TEST_CASE("nearest correlation repairs an indefinite matrix") {
  Matrix A(3, 3);
  A << 1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0;
  const Matrix P = nearest_correlation(A);
  CHECK((P.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff() > 0.0);
  CHECK_NOTHROW(TCopula(P, 4.0));
  // Already valid matrices are left (nearly) alone.
  Rng rng(5);
  const Matrix R = random_correlation(4, rng);
  CHECK((nearest_correlation(R) - R).norm() < 1e-6);
}

TEST_CASE("fit recovers the generating copula") {
  Rng rng(101);
  Matrix R(3, 3);
  R << 1.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 1.0;
  const TCopula truth(R, 5.0);
  const int L = 3000;
  Matrix U(L, 3);
  for (int l = 0; l < L; ++l) U.row(l) = sample_tcopula(truth, rng).transpose();
  CopulaFitReport rep;
  const TCopula fit = fit_tcopula(U, &rep);
  CHECK((fit.R() - R).cwiseAbs().maxCoeff() < 0.05);
  CHECK(fit.delta() > 3.0);
  CHECK(fit.delta() < 9.0);
  CHECK_FALSE(rep.projected);
  CHECK(std::isfinite(rep.loglik));
}

TEST_CASE("independent pseudo-observations give a near-identity fit") {
  Rng rng(44);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int L = 400;
  Matrix U(L, 4);
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < 4; ++k) U(l, k) = unif(rng);
  const TCopula fit = fit_tcopula(U);
  CHECK((fit.R() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.15);
  CHECK(fit.delta() >= kDeltaMin);
  CHECK(fit.delta() <= kDeltaMax);
}

TEST_CASE("comonotone columns are clamped and stay positive definite") {
  Rng rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int L = 50;
  Matrix U(L, 3);
  for (int l = 0; l < L; ++l) {
    U(l, 0) = unif(rng);
    U(l, 1) = U(l, 0);
    U(l, 2) = U(l, 0);
  }
  const TCopula fit = fit_tcopula(U);
  CHECK(fit.R()(0, 1) <= kMaxAbsCorrelation + 1e-12);
  CHECK(fit.R()(0, 1) > 0.99);
  CHECK(std::isfinite(fit.log_det()));
}

TEST_CASE("copula samples have uniform margins") {
  Rng rng(9);
  Matrix R(2, 2);
  R << 1.0, -0.7, -0.7, 1.0;
  const TCopula c(R, 3.0);
  const int L = 4000;
  std::vector<double> col(L);
  for (int l = 0; l < L; ++l) col[l] = sample_tcopula(c, rng)[1];
  std::sort(col.begin(), col.end());
  double ks = 0.0;
  for (int l = 0; l < L; ++l)
    ks = std::max({ks, std::abs(col[l] - static_cast<double>(l) / L), std::abs(col[l] - static_cast<double>(l + 1) / L)});
  CHECK(ks < 1.63 / std::sqrt(static_cast<double>(L)));
}

TEST_CASE("too few training vectors is an error") {
  Matrix U = Matrix::Constant(3, 3, 0.5);
  CHECK_THROWS_AS(fit_tcopula(U), FitError);
}
