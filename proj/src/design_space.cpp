#include "auxdesign/design_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "auxdesign/format.hpp"

namespace auxdesign {

namespace {

double spacing_tolerance(const Interval& b) { return 1e-12 * std::max(1.0, b.width()); }

}  // namespace

Design Design::from_points(const std::vector<DesignPoint>& points) {
  if (points.empty()) return {};
  Design d(points.size(), points.front().size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != d.w()) throw Error("design points have inconsistent dimension");
    std::copy(points[k].begin(), points[k].end(), d.row(k).begin());
  }
  return d;
}

std::vector<double> Design::column(std::size_t coord) const {
  std::vector<double> out(n_);
  for (std::size_t k = 0; k < n_; ++k) out[k] = (*this)(k, coord);
  return out;
}

DesignSpace::DesignSpace(std::vector<Interval> bounds, std::vector<MinSpacing> constraints)
    : bounds_(std::move(bounds)), constraints_(std::move(constraints)) {
  if (bounds_.empty()) throw ConfigError("design space needs at least one coordinate");
  for (const auto& b : bounds_)
    if (!(b.lo < b.hi)) throw ConfigError("design space bound must satisfy lo < hi");
  for (const auto& c : constraints_) {
    if (c.coordinate >= bounds_.size()) throw ConfigError("spacing constraint on unknown coordinate");
    if (!(c.gap >= 0.0)) throw ConfigError("spacing gap must be non-negative");
  }
}

bool DesignSpace::contains(std::span<const double> point) const {
  if (point.size() != w()) return false;
  for (std::size_t l = 0; l < w(); ++l)
    if (point[l] < bounds_[l].lo || point[l] > bounds_[l].hi) return false;
  return true;
}

std::vector<double> DesignSpace::to_unit(std::span<const double> point) const {
  std::vector<double> out(point.size());
  for (std::size_t l = 0; l < point.size(); ++l)
    out[l] = (point[l] - bounds_[l].lo) / bounds_[l].width();
  return out;
}

std::vector<DesignPoint> latin_hypercube(const DesignSpace& space, std::size_t count,
                                         std::uint64_t seed) {
  if (count < 2) throw ConfigError("latin hypercube needs at least 2 points");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<DesignPoint> points(count, DesignPoint(space.w()));
  std::vector<std::size_t> perm(count);
  for (std::size_t l = 0; l < space.w(); ++l) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Interval& b = space.bound(l);
    const double cell = b.width() / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = b.lo + (static_cast<double>(perm[i]) + unif(rng)) * cell;
      // Keep the point inside its half-open cell despite rounding.
      const double cell_hi = b.lo + static_cast<double>(perm[i] + 1) * cell;
      points[i][l] = std::min(x, std::nextafter(cell_hi, b.lo));
    }
  }
  return points;
}

Design equally_spaced(const DesignSpace& space, std::size_t n) {
  if (space.w() != 1) throw ConfigError("equally spaced designs need a one-dimensional design space");
  if (n == 0) throw ConfigError("equally spaced design needs n >= 1");
  const Interval& b = space.bound(0);
  Design d(n, 1);
  for (std::size_t k = 0; k < n; ++k)
    d(k, 0) = b.lo + static_cast<double>(k + 1) * b.width() / static_cast<double>(n + 1);
  return d;
}

double min_pairwise_distance(const Design& design, const DesignSpace& space) {
  double best = kInf;
  for (std::size_t i = 0; i < design.n(); ++i) {
    const auto ui = space.to_unit(design.row(i));
    for (std::size_t j = i + 1; j < design.n(); ++j) {
      const auto uj = space.to_unit(design.row(j));
      double s = 0.0;
      for (std::size_t l = 0; l < ui.size(); ++l) s += (ui[l] - uj[l]) * (ui[l] - uj[l]);
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

Design maximin_lhd(const DesignSpace& space, std::size_t n, std::size_t restarts,
                   std::uint64_t seed) {
  if (n < 2) throw ConfigError("maximin LHD needs n >= 2");
  if (restarts == 0) throw ConfigError("maximin LHD needs at least one restart");
  Design best;
  double best_distance = -1.0;
  for (std::size_t r = 0; r < restarts; ++r) {
    Design candidate = Design::from_points(latin_hypercube(space, n, derive_seed(seed, "maximin", r)));
    const double dist = min_pairwise_distance(candidate, space);
    if (dist > best_distance) {
      best_distance = dist;
      best = std::move(candidate);
    }
  }
  return best;
}

ConstraintReport check_constraints(const Design& design, const DesignSpace& space) {
  ConstraintReport report;
  if (design.w() != space.w()) {
    report.feasible = false;
    report.violations.push_back("design has " + std::to_string(design.w()) + " coordinates, space has " +
                                std::to_string(space.w()));
    return report;
  }
  for (std::size_t k = 0; k < design.n(); ++k)
    if (!space.contains(design.row(k))) {
      report.feasible = false;
      report.violations.push_back("run " + std::to_string(k + 1) + " lies outside the bounds");
    }
  for (const auto& c : space.constraints()) {
    std::vector<double> v = design.column(c.coordinate);
    std::sort(v.begin(), v.end());
    const double tol = spacing_tolerance(space.bound(c.coordinate));
    for (std::size_t k = 1; k < v.size(); ++k) {
      if (v[k] - v[k - 1] < c.gap - tol) {
        report.feasible = false;
        report.violations.push_back("coordinate " + std::to_string(c.coordinate + 1) + ": " +
                                    fmt17(v[k - 1]) + " and " + fmt17(v[k]) + " closer than " +
                                    fmt17(c.gap));
      }
    }
  }
  return report;
}

bool project_coordinate(const Design& design, const DesignSpace& space, std::size_t run,
                        std::size_t coord, double proposal, double& projected) {
  const Interval& b = space.bound(coord);
  const double tol = spacing_tolerance(b);
  std::vector<double> gaps;
  for (const auto& c : space.constraints())
    if (c.coordinate == coord) gaps.push_back(c.gap);
  const double gap = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());

  auto feasible = [&](double x) {
    if (x < b.lo || x > b.hi) return false;
    if (gap <= 0.0) return true;
    for (std::size_t k = 0; k < design.n(); ++k)
      if (k != run && std::abs(x - design(k, coord)) < gap - tol) return false;
    return true;
  };

  std::vector<double> candidates{std::clamp(proposal, b.lo, b.hi), b.lo, b.hi};
  if (gap > 0.0) {
    for (std::size_t k = 0; k < design.n(); ++k) {
      if (k == run) continue;
      candidates.push_back(design(k, coord) - gap);
      candidates.push_back(design(k, coord) + gap);
    }
  }
  bool found = false;
  double best = 0.0;
  for (double x : candidates) {
    if (!feasible(x)) continue;
    if (!found || std::abs(x - proposal) < std::abs(best - proposal)) {
      best = x;
      found = true;
    }
  }
  if (found) projected = best;
  return found;
}

Design random_feasible_design(const DesignSpace& space, std::size_t n, Rng& rng) {
  Design d(n, space.w());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t l = 0; l < space.w(); ++l) {
    const Interval& b = space.bound(l);
    double gap = 0.0;
    for (const auto& c : space.constraints())
      if (c.coordinate == l) gap = std::max(gap, c.gap);
    const double span = b.width() - gap * static_cast<double>(n - 1);
    if (span < 0.0) throw ConfigError("design space cannot hold n runs at the required spacing");
    // Sorted uniforms on the shrunk interval, shifted by k * gap, are uniform
    // over feasible sorted configurations; a shuffle restores exchangeability.
    std::vector<double> v(n);
    for (auto& x : v) x = b.lo + span * unif(rng);
    std::sort(v.begin(), v.end());
    for (std::size_t k = 0; k < n; ++k) v[k] = std::min(b.hi, v[k] + gap * static_cast<double>(k));
    std::shuffle(v.begin(), v.end(), rng);
    for (std::size_t k = 0; k < n; ++k) d(k, l) = v[k];
  }
  return d;
}

void write_design_csv(std::ostream& out, const Design& design) {
  out << "# design n=" << design.n() << " w=" << design.w() << "\n";
  for (std::size_t l = 0; l < design.w(); ++l) out << (l ? "," : "") << "d_" << (l + 1);
  out << "\n";
  for (std::size_t k = 0; k < design.n(); ++k) {
    for (std::size_t l = 0; l < design.w(); ++l) out << (l ? "," : "") << fmt17(design(k, l));
    out << "\n";
  }
}

Design read_design_csv(std::istream& in) {
  std::string line;
  std::size_t n = 0, w = 0;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "# design n=%zu w=%zu", &n, &w) != 2)
    throw ConfigError("design CSV must start with '# design n=<n> w=<w>'");
  Design d(n, w);
  std::size_t k = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'd') continue;
    if (k >= n) throw ConfigError("design CSV has more rows than declared");
    std::stringstream ss(line);
    std::string cell;
    std::size_t l = 0;
    while (std::getline(ss, cell, ',')) {
      if (l >= w) throw ConfigError("design CSV row has too many columns");
      d(k, l++) = std::stod(cell);
    }
    if (l != w) throw ConfigError("design CSV row has too few columns");
    ++k;
  }
  if (k != n) throw ConfigError("design CSV has fewer rows than declared");
  return d;
}

void save_design(const std::string& path, const Design& design) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_design_csv(out, design);
}

Design load_design(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read design file " + path);
  return read_design_csv(in);
}

}  // namespace auxdesign
