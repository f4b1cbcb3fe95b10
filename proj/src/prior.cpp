#include "auxdesign/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

namespace auxdesign {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kTailProb = 1e-3;

double mvn_logpdf(const Vector& x, const Vector& mean, const Matrix& chol) {
  const Vector z = chol.triangularView<Eigen::Lower>().solve(x - mean);
  const double logdet = 2.0 * chol.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * kLogTwoPi + logdet + z.squaredNorm());
}

Vector std_normal(std::size_t k, Rng& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Vector z(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = norm(rng);
  return z;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("prior: " + what);
}

}  // namespace

PriorBlock Prior::multivariate_normal(std::vector<std::size_t> idx, Vector mean, Matrix cov,
                                      bool nonnegative) {
  return {PriorKind::MultivariateNormal, std::move(idx), std::move(mean), Vector(), std::move(cov),
          nonnegative};
}

PriorBlock Prior::lognormal(std::vector<std::size_t> idx, Vector log_mean, Vector log_var) {
  return {PriorKind::LogNormalIndependent, std::move(idx), std::move(log_mean), std::move(log_var),
          Matrix(), false};
}

PriorBlock Prior::gamma(std::vector<std::size_t> idx, Vector mean, Vector var) {
  return {PriorKind::Gamma, std::move(idx), std::move(mean), std::move(var), Matrix(), false};
}

PriorBlock Prior::uniform(std::vector<std::size_t> idx, Vector lo, Vector hi) {
  return {PriorKind::Uniform, std::move(idx), std::move(lo), std::move(hi), Matrix(), false};
}

PriorBlock Prior::sqrt_bivariate_normal(std::size_t i, std::size_t j, Vector mean, Matrix cov) {
  return {PriorKind::SqrtBivariateNormal, {i, j}, std::move(mean), Vector(), std::move(cov), false};
}

Prior::Prior(std::vector<PriorBlock> blocks) : blocks_(std::move(blocks)) {
  std::vector<int> covered;
  for (const auto& blk : blocks_) {
    const auto k = static_cast<Eigen::Index>(blk.indices.size());
    require(k > 0, "empty block");
    for (auto i : blk.indices) {
      if (covered.size() <= i) covered.resize(i + 1, 0);
      ++covered[i];
    }
    Matrix chol;
    switch (blk.kind) {
      case PriorKind::MultivariateNormal:
      case PriorKind::SqrtBivariateNormal: {
        require(blk.kind != PriorKind::SqrtBivariateNormal || k == 2,
                "sqrt bivariate normal acts on exactly two parameters");
        require(blk.a.size() == k && blk.cov.rows() == k && blk.cov.cols() == k,
                "normal block dimensions mismatch");
        require((blk.cov - blk.cov.transpose()).cwiseAbs().maxCoeff() <=
                    1e-12 * blk.cov.cwiseAbs().maxCoeff(),
                "covariance must be symmetric");
        Eigen::LLT<Matrix> llt(blk.cov);
        require(llt.info() == Eigen::Success, "covariance must be positive definite");
        chol = llt.matrixL();
        break;
      }
      case PriorKind::LogNormalIndependent:
        require(blk.a.size() == k && blk.b.size() == k, "lognormal block dimensions mismatch");
        require((blk.b.array() > 0.0).all(), "log-variances must be positive");
        break;
      case PriorKind::Gamma:
        require(blk.a.size() == k && blk.b.size() == k, "gamma block dimensions mismatch");
        require((blk.a.array() > 0.0).all() && (blk.b.array() > 0.0).all(),
                "gamma mean and variance must be positive");
        break;
      case PriorKind::Uniform:
        require(blk.a.size() == k && blk.b.size() == k, "uniform block dimensions mismatch");
        require((blk.a.array() < blk.b.array()).all(), "uniform bounds must satisfy lo < hi");
        break;
    }
    chol_.push_back(std::move(chol));
  }
  require(!covered.empty() && std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; }),
          "blocks must cover every parameter exactly once");
  dim_ = covered.size();
}

Vector Prior::sample(Rng& rng) const {
  Vector theta(static_cast<Eigen::Index>(dim_));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    const std::size_t k = blk.indices.size();
    switch (blk.kind) {
      case PriorKind::MultivariateNormal: {
        Vector x;
        for (int attempt = 0;; ++attempt) {
          x = blk.a + chol_[b] * std_normal(k, rng);
          if (!blk.nonnegative || (x.array() >= 0.0).all()) break;
          if (attempt > 100000) throw Error("prior: truncated normal rejection sampling failed");
        }
        for (std::size_t i = 0; i < k; ++i) theta[blk.indices[i]] = x[i];
        break;
      }
      case PriorKind::SqrtBivariateNormal: {
        const Vector z = blk.a + chol_[b] * std_normal(k, rng);
        for (std::size_t i = 0; i < k; ++i) theta[blk.indices[i]] = z[i] * z[i];
        break;
      }
      case PriorKind::LogNormalIndependent:
        for (std::size_t i = 0; i < k; ++i) {
          std::normal_distribution<double> norm(blk.a[i], std::sqrt(blk.b[i]));
          theta[blk.indices[i]] = std::exp(norm(rng));
        }
        break;
      case PriorKind::Gamma:
        for (std::size_t i = 0; i < k; ++i) {
          const double shape = blk.a[i] * blk.a[i] / blk.b[i];
          const double scale = blk.b[i] / blk.a[i];
          std::gamma_distribution<double> gam(shape, scale);
          theta[blk.indices[i]] = gam(rng);
        }
        break;
      case PriorKind::Uniform:
        for (std::size_t i = 0; i < k; ++i) {
          std::uniform_real_distribution<double> unif(blk.a[i], blk.b[i]);
          theta[blk.indices[i]] = unif(rng);
        }
        break;
    }
  }
  return theta;
}

std::vector<Vector> Prior::sample(std::size_t count, Rng& rng) const {
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

double Prior::log_density(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dim_) return kNegInf;
  double total = 0.0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    const auto k = static_cast<Eigen::Index>(blk.indices.size());
    Vector x(k);
    for (Eigen::Index i = 0; i < k; ++i) x[i] = theta[blk.indices[i]];
    switch (blk.kind) {
      case PriorKind::MultivariateNormal:
        if (blk.nonnegative && (x.array() < 0.0).any()) return kNegInf;
        total += mvn_logpdf(x, blk.a, chol_[b]);
        break;
      case PriorKind::SqrtBivariateNormal: {
        if ((x.array() <= 0.0).any()) return kNegInf;
        const Vector r = x.array().sqrt();
        // theta = z^2 folds the four sign branches of z onto one point.
        double acc = kNegInf;
        for (double sa : {-1.0, 1.0})
          for (double sb : {-1.0, 1.0}) {
            const Vector z{{sa * r[0], sb * r[1]}};
            const double lp = mvn_logpdf(z, blk.a, chol_[b]);
            const double hi = std::max(acc, lp);
            if (hi > kNegInf) acc = hi + std::log(std::exp(acc - hi) + std::exp(lp - hi));
          }
        total += acc - std::log(4.0 * r[0] * r[1]);
        break;
      }
      case PriorKind::LogNormalIndependent:
        for (Eigen::Index i = 0; i < k; ++i) {
          if (!(x[i] > 0.0)) return kNegInf;
          const double lx = std::log(x[i]);
          total += -lx - 0.5 * (kLogTwoPi + std::log(blk.b[i])) -
                   (lx - blk.a[i]) * (lx - blk.a[i]) / (2.0 * blk.b[i]);
        }
        break;
      case PriorKind::Gamma:
        for (Eigen::Index i = 0; i < k; ++i) {
          if (!(x[i] > 0.0)) return kNegInf;
          const double shape = blk.a[i] * blk.a[i] / blk.b[i];
          const double rate = blk.a[i] / blk.b[i];
          total += shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x[i]) -
                   rate * x[i];
        }
        break;
      case PriorKind::Uniform:
        for (Eigen::Index i = 0; i < k; ++i) {
          if (x[i] < blk.a[i] || x[i] > blk.b[i]) return kNegInf;
          total -= std::log(blk.b[i] - blk.a[i]);
        }
        break;
    }
  }
  return total;
}

Interval Prior::marginal_range(std::size_t idx) const {
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - kTailProb);
  for (const auto& blk : blocks_) {
    const auto it = std::find(blk.indices.begin(), blk.indices.end(), idx);
    if (it == blk.indices.end()) continue;
    const auto i = static_cast<Eigen::Index>(it - blk.indices.begin());
    Interval r;
    switch (blk.kind) {
      case PriorKind::MultivariateNormal: {
        const double sd = std::sqrt(blk.cov(i, i));
        r = {blk.a[i] - z * sd, blk.a[i] + z * sd};
        if (blk.nonnegative) r.lo = std::max(0.0, r.lo);
        break;
      }
      case PriorKind::SqrtBivariateNormal: {
        const double sd = std::sqrt(blk.cov(i, i));
        const double lo = blk.a[i] - z * sd, hi = blk.a[i] + z * sd;
        if (lo > 0.0)
          r = {lo * lo, hi * hi};
        else
          r = {0.0, std::max(lo * lo, hi * hi)};
        break;
      }
      case PriorKind::LogNormalIndependent: {
        const double sd = std::sqrt(blk.b[i]);
        r = {std::exp(blk.a[i] - z * sd), std::exp(blk.a[i] + z * sd)};
        break;
      }
      case PriorKind::Gamma: {
        const double shape = blk.a[i] * blk.a[i] / blk.b[i];
        const double scale = blk.b[i] / blk.a[i];
        boost::math::gamma_distribution<double> g(shape, scale);
        r = {boost::math::quantile(g, kTailProb), boost::math::quantile(g, 1.0 - kTailProb)};
        break;
      }
      case PriorKind::Uniform: {
        const double w = blk.b[i] - blk.a[i];
        r = {blk.a[i] + kTailProb * w, blk.b[i] - kTailProb * w};
        break;
      }
    }
    if (!(r.hi > r.lo)) r = {r.lo - 0.5, r.lo + 0.5};
    return r;
  }
  throw Error("prior: parameter index out of range");
}

}  // namespace auxdesign
