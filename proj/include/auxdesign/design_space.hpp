#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "auxdesign/core.hpp"

namespace auxdesign {

using DesignPoint = std::vector<double>;

/// n runs of w design variables, stored row-major (one row per run).
class Design {
 public:
  Design() = default;
  Design(std::size_t n, std::size_t w, double fill = 0.0) : n_(n), w_(w), values_(n * w, fill) {}
  static Design from_points(const std::vector<DesignPoint>& points);

  std::size_t n() const { return n_; }
  std::size_t w() const { return w_; }
  double& operator()(std::size_t run, std::size_t coord) { return values_[run * w_ + coord]; }
  double operator()(std::size_t run, std::size_t coord) const { return values_[run * w_ + coord]; }
  std::span<const double> row(std::size_t run) const { return {values_.data() + run * w_, w_}; }
  std::span<double> row(std::size_t run) { return {values_.data() + run * w_, w_}; }
  const std::vector<double>& values() const { return values_; }

  /// Values of coordinate `coord` across runs.
  std::vector<double> column(std::size_t coord) const;

  friend bool operator==(const Design&, const Design&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t w_ = 0;
  std::vector<double> values_;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

/// Runs must differ by at least `gap` in coordinate `coordinate` (inclusive).
struct MinSpacing {
  std::size_t coordinate = 0;
  double gap = 0.0;
};

struct ConstraintReport {
  bool feasible = true;
  std::vector<std::string> violations;
};

class DesignSpace {
 public:
  DesignSpace() = default;
  DesignSpace(std::vector<Interval> bounds, std::vector<MinSpacing> constraints = {});

  std::size_t w() const { return bounds_.size(); }
  const std::vector<Interval>& bounds() const { return bounds_; }
  const Interval& bound(std::size_t coord) const { return bounds_.at(coord); }
  const std::vector<MinSpacing>& constraints() const { return constraints_; }

  bool contains(std::span<const double> point) const;
  /// Scales a point to the unit cube.
  std::vector<double> to_unit(std::span<const double> point) const;

 private:
  std::vector<Interval> bounds_;
  std::vector<MinSpacing> constraints_;
};

/// M points with every margin stratified into M equal-width cells, one point
/// per cell, jittered uniformly within its cell.
std::vector<DesignPoint> latin_hypercube(const DesignSpace& space, std::size_t count,
                                         std::uint64_t seed);

/// n interior points lo + k (hi - lo) / (n + 1), k = 1..n (w = 1 only).
Design equally_spaced(const DesignSpace& space, std::size_t n);

/// Best of `restarts` random LHDs under the minimum pairwise distance on the
/// unit-scaled cube.
Design maximin_lhd(const DesignSpace& space, std::size_t n, std::size_t restarts,
                   std::uint64_t seed);

/// Minimum pairwise Euclidean distance of a design after scaling to [0,1]^w.
double min_pairwise_distance(const Design& design, const DesignSpace& space);

ConstraintReport check_constraints(const Design& design, const DesignSpace& space);

/// Nearest value to `proposal` for coordinate (run, coord) that keeps every
/// spacing constraint satisfied given the other runs. Returns false when the
/// coordinate has no feasible value.
bool project_coordinate(const Design& design, const DesignSpace& space, std::size_t run,
                        std::size_t coord, double proposal, double& projected);

/// Uniform random design that satisfies the constraints (rejection sampling
/// with a bounded number of attempts, then a spaced fallback).
Design random_feasible_design(const DesignSpace& space, std::size_t n, Rng& rng);

/// CSV with header `# design n=<n> w=<w>` then one row per run.
void write_design_csv(std::ostream& out, const Design& design);
Design read_design_csv(std::istream& in);
void save_design(const std::string& path, const Design& design);
Design load_design(const std::string& path);

}  // namespace auxdesign
