#include "auxdesign/mgp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "auxdesign/format.hpp"
#include "auxdesign/optimize.hpp"

namespace auxdesign {

namespace {

std::span<const double> row_span(const Matrix& m, Eigen::Index i, std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) buf[static_cast<std::size_t>(j)] = m(i, j);
  return buf;
}

// Per-coordinate pairwise squared distances (SEE: mismatch indicator last).
std::vector<Matrix> pairwise(const Matrix& Xs, KernelKind kind) {
  const Eigen::Index M = Xs.rows(), s = Xs.cols();
  std::vector<Matrix> out(static_cast<std::size_t>(s), Matrix(M, M));
  for (Eigen::Index l = 0; l < s; ++l) {
    const bool categorical = kind == KernelKind::SEE && l == s - 1;
    Matrix& D = out[static_cast<std::size_t>(l)];
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j) {
        const double diff = Xs(i, l) - Xs(j, l);
        D(i, j) = categorical ? (diff != 0.0 ? 1.0 : 0.0) : diff * diff;
      }
  }
  return out;
}

Matrix gram(const std::vector<Matrix>& D, const Vector& rho, double eta) {
  Matrix E = Matrix::Zero(D[0].rows(), D[0].cols());
  for (std::size_t l = 0; l < D.size(); ++l) E.noalias() -= rho[static_cast<Eigen::Index>(l)] * D[l];
  Matrix A = E.array().exp().matrix();
  A.diagonal().array() += eta;
  return A;
}

struct Profile {
  double loglik = kNegInf;
  Vector beta;
  Matrix sigma;
  Matrix weights;
};

Profile profile(const Eigen::LLT<Matrix>& llt, const Matrix& Z) {
  Profile p;
  const Eigen::Index M = Z.rows();
  const auto v = static_cast<double>(Z.cols());
  const Vector ones = Vector::Ones(M);
  const Vector ainv1 = llt.solve(ones);
  const double denom = ones.dot(ainv1);
  if (!(denom > 0.0) || !std::isfinite(denom)) return p;
  p.beta = Z.transpose() * ainv1 / denom;
  const Matrix R = Z.rowwise() - p.beta.transpose();
  p.weights = llt.solve(R);
  p.sigma = R.transpose() * p.weights / static_cast<double>(M);
  p.sigma = 0.5 * (p.sigma + p.sigma.transpose());
  const double logdet_a = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  Matrix guarded = p.sigma;
  const double ridge = 1e-12 * std::max(guarded.diagonal().maxCoeff(), 1e-12);
  guarded.diagonal().array() += ridge;
  Eigen::LLT<Matrix> sl(guarded);
  if (sl.info() != Eigen::Success) return p;
  const double logdet_s = 2.0 * sl.matrixLLT().diagonal().array().log().sum();
  p.loglik = -0.5 * static_cast<double>(M) * logdet_s - 0.5 * v * logdet_a;
  if (!std::isfinite(p.loglik)) p.loglik = kNegInf;
  return p;
}

Matrix standardize_rows(const Matrix& X, const Vector& lo, const Vector& hi, KernelKind kind) {
  Matrix Xs = X;
  if (lo.size() == 0) return Xs;
  const Eigen::Index last = kind == KernelKind::SEE ? X.cols() - 1 : X.cols();
  for (Eigen::Index l = 0; l < last; ++l)
    Xs.col(l) = (X.col(l).array() - lo[l]) / (hi[l] - lo[l]);
  return Xs;
}

std::vector<double> split_numbers(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    std::size_t used = 0;
    out.push_back(std::stod(cell, &used));
  }
  return out;
}

}  // namespace

double kernel_eval(const Kernel& kernel, std::span<const double> xi, std::span<const double> xj) {
  const std::size_t s = xi.size();
  double e = 0.0;
  for (std::size_t l = 0; l < s; ++l) {
    const double diff = xi[l] - xj[l];
    if (kernel.kind == KernelKind::SEE && l + 1 == s)
      e += diff != 0.0 ? kernel.rho[static_cast<Eigen::Index>(l)] : 0.0;
    else
      e += kernel.rho[static_cast<Eigen::Index>(l)] * diff * diff;
  }
  return std::exp(-e);
}

double MgpFit::profile_loglik(const Matrix& Xs, const Matrix& Z, const Kernel& kernel) {
  Eigen::LLT<Matrix> llt(gram(pairwise(Xs, kernel.kind), kernel.rho, kernel.eta));
  if (llt.info() != Eigen::Success) return kNegInf;
  return profile(llt, Z).loglik;
}

MgpFit MgpFit::assemble(const Matrix& X, const Matrix& Z, const Kernel& kernel,
                        const Vector& input_lo, const Vector& input_hi) {
  if (X.rows() != Z.rows()) throw FitError("mgp: X and Z row counts differ");
  if (kernel.rho.size() != X.cols()) throw FitError("mgp: kernel dimension mismatch");
  MgpFit f;
  f.X_ = X;
  f.Z_ = Z;
  f.lo_ = input_lo;
  f.hi_ = input_hi;
  f.kernel_ = kernel;
  f.Xs_ = standardize_rows(X, input_lo, input_hi, kernel.kind);
  f.chol_.compute(gram(pairwise(f.Xs_, kernel.kind), kernel.rho, kernel.eta));
  if (f.chol_.info() != Eigen::Success) throw FitError("mgp: Gram matrix is not positive definite");
  Profile p = profile(f.chol_, Z);
  if (p.beta.size() == 0) throw FitError("mgp: degenerate Gram matrix");
  f.beta_ = std::move(p.beta);
  f.sigma_ = std::move(p.sigma);
  f.weights_ = std::move(p.weights);
  f.loglik_ = p.loglik;
  return f;
}

MgpFit MgpFit::fit(const Matrix& X, const Matrix& Z, const MgpOptions& options) {
  const Eigen::Index M = X.rows(), s = X.cols();
  if (M != Z.rows()) throw FitError("mgp: X and Z row counts differ");
  if (M < s + 2)
    throw FitError("mgp: need at least s + 2 = " + std::to_string(s + 2) + " training points, got " +
                   std::to_string(M));
  if (!Z.allFinite() || !X.allFinite()) throw FitError("mgp: non-finite training data");
  if (options.input_lo.size() != 0 &&
      (options.input_lo.size() != s || options.input_hi.size() != s))
    throw FitError("mgp: input scaling dimension mismatch");
  if (options.fixed_rho && options.fixed_rho->size() != s)
    throw FitError("mgp: fixed rho dimension mismatch");

  const Matrix Xs = standardize_rows(X, options.input_lo, options.input_hi, options.kind);
  const std::vector<Matrix> D = pairwise(Xs, options.kind);

  // Free variables: log rho (unless pinned) then log eta (unless pinned).
  const bool free_rho = !options.fixed_rho, free_eta = !options.fixed_eta;
  const Eigen::Index nr = free_rho ? s : 0;
  const Eigen::Index nfree = nr + (free_eta ? 1 : 0);
  const auto unpack = [&](const Vector& x) {
    Kernel k{options.kind, options.fixed_rho.value_or(Vector()), options.fixed_eta.value_or(0.0)};
    if (free_rho) k.rho = x.head(nr).array().exp();
    if (free_eta) k.eta = std::exp(x[nr]);
    return k;
  };
  const auto objective = [&](const Vector& x) {
    const Kernel k = unpack(x);
    Eigen::LLT<Matrix> llt(gram(D, k.rho, k.eta));
    if (llt.info() != Eigen::Success) return kInf;
    const double ll = profile(llt, Z).loglik;
    return std::isfinite(ll) ? -ll : kInf;
  };

  Kernel best = unpack(Vector::Zero(nfree));
  if (nfree > 0) {
    Vector lower(nfree), upper(nfree);
    lower.head(nr).setConstant(options.log_rho_min);
    upper.head(nr).setConstant(options.log_rho_max);
    if (free_eta) {
      lower[nr] = std::log(options.eta_min);
      upper[nr] = std::log(options.eta_max);
    }
    std::vector<Vector> starts;
    Vector anchor = Vector::Zero(nfree);
    if (free_eta) anchor[nr] = std::clamp(std::log(1e-4), lower[nr], upper[nr]);
    starts.push_back(anchor);
    // Latin hypercube over the search box.
    Rng rng(derive_seed(options.seed, "mgp-starts"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int K = std::max(options.multistarts, 0);
    std::vector<Vector> lhs(static_cast<std::size_t>(K), Vector(nfree));
    for (Eigen::Index j = 0; j < nfree; ++j) {
      std::vector<int> perm(static_cast<std::size_t>(K));
      for (int k = 0; k < K; ++k) perm[static_cast<std::size_t>(k)] = k;
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int k = 0; k < K; ++k) {
        const double u = (perm[static_cast<std::size_t>(k)] + unif(rng)) / K;
        lhs[static_cast<std::size_t>(k)][j] = lower[j] + u * (upper[j] - lower[j]);
      }
    }
    starts.insert(starts.end(), lhs.begin(), lhs.end());

    MinimizeResult winner;
    for (const Vector& x0 : starts) {
      MinimizeResult r = minimize_box(objective, x0, lower, upper);
      if (r.value < winner.value) winner = std::move(r);
    }
    if (!std::isfinite(winner.value))
      throw FitError("mgp: no hyperparameter candidate gave a positive definite Gram matrix");
    best = unpack(winner.x);
  }
  return assemble(X, Z, best, options.input_lo, options.input_hi);
}

Vector MgpFit::standardize(std::span<const double> x) const {
  if (x.size() != input_dim()) throw Error("mgp: input dimension mismatch");
  Vector xs = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  if (lo_.size() == 0) return xs;
  const Eigen::Index last = kernel_.kind == KernelKind::SEE ? xs.size() - 1 : xs.size();
  for (Eigen::Index l = 0; l < last; ++l) xs[l] = (xs[l] - lo_[l]) / (hi_[l] - lo_[l]);
  return xs;
}

Vector MgpFit::predict_mean(std::span<const double> x) const {
  const Vector xs = standardize(x);
  const std::span<const double> xv(xs.data(), static_cast<std::size_t>(xs.size()));
  std::vector<double> buf;
  Vector a(Xs_.rows());
  for (Eigen::Index i = 0; i < Xs_.rows(); ++i) a[i] = kernel_eval(kernel_, xv, row_span(Xs_, i, buf));
  return beta_ + weights_.transpose() * a;
}

MgpPrediction MgpFit::predict(std::span<const double> x) const {
  const Vector xs = standardize(x);
  const std::span<const double> xv(xs.data(), static_cast<std::size_t>(xs.size()));
  std::vector<double> buf;
  Vector a(Xs_.rows());
  for (Eigen::Index i = 0; i < Xs_.rows(); ++i) a[i] = kernel_eval(kernel_, xv, row_span(Xs_, i, buf));
  MgpPrediction p;
  p.mean = beta_ + weights_.transpose() * a;
  p.scale = std::max(1.0 + kernel_.eta - a.dot(chol_.solve(a)), 0.0);
  p.row_cov = sigma_;
  return p;
}

AuxParams MgpFit::predict_phi(std::span<const double> x, const AuxiliaryFamily& family) const {
  return family.from_z(predict_mean(x));
}

void MgpFit::save(std::ostream& out) const {
  out << "# mgp";
  for (const auto& [k, v] : meta) out << ' ' << k << '=' << v;
  out << '\n';
  out << "[kernel]\n" << (kernel_.kind == KernelKind::SEE ? "SEE" : "SE") << '\n';
  const auto write_vec = [&](const char* name, const Vector& v) {
    out << '[' << name << "]\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? "," : "") << fmt17(v[i]);
    out << '\n';
  };
  const auto write_mat = [&](const char* name, const Matrix& m) {
    out << '[' << name << "] " << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt17(m(i, j));
      out << '\n';
    }
  };
  write_vec("rho", kernel_.rho);
  write_vec("eta", Vector::Constant(1, kernel_.eta));
  write_vec("input_lo", lo_);
  write_vec("input_hi", hi_);
  write_mat("X", X_);
  write_mat("Z", Z_);
}

MgpFit MgpFit::load(std::istream& in) {
  std::string line;
  std::map<std::string, std::string> meta;
  if (!std::getline(in, line) || line.rfind("# mgp", 0) != 0) throw Error("mgp: missing header");
  {
    std::stringstream ss(line.substr(5));
    std::string tok;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  Kernel kernel;
  Vector lo, hi;
  Matrix X, Z;
  const auto read_vec = [&]() {
    std::getline(in, line);
    const auto vals = split_numbers(line);
    return Vector(Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  };
  const auto read_mat = [&](const std::string& header) {
    std::stringstream ss(header);
    std::string name;
    Eigen::Index r = 0, c = 0;
    ss >> name >> r >> c;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (!std::getline(in, line)) throw Error("mgp: truncated matrix block");
      const auto vals = split_numbers(line);
      if (static_cast<Eigen::Index>(vals.size()) != c) throw Error("mgp: malformed matrix row");
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = vals[static_cast<std::size_t>(j)];
    }
    return m;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "[kernel]") {
      std::getline(in, line);
      kernel.kind = line == "SEE" ? KernelKind::SEE : KernelKind::SE;
    } else if (line == "[rho]") {
      kernel.rho = read_vec();
    } else if (line == "[eta]") {
      kernel.eta = read_vec()[0];
    } else if (line == "[input_lo]") {
      lo = read_vec();
    } else if (line == "[input_hi]") {
      hi = read_vec();
    } else if (line.rfind("[X]", 0) == 0) {
      X = read_mat(line);
    } else if (line.rfind("[Z]", 0) == 0) {
      Z = read_mat(line);
    } else {
      throw Error("mgp: unexpected line '" + line + "'");
    }
  }
  MgpFit f = assemble(X, Z, kernel, lo, hi);
  f.meta = std::move(meta);
  return f;
}

void MgpFit::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  save(out);
}

MgpFit MgpFit::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return load(in);
}

}  // namespace auxdesign
