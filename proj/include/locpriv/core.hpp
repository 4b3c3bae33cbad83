#pragma once

// Location spaces, priors, user profiles, the shared query cache and the
// covered-set geometry every other module builds on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "locpriv/error.hpp"
#include "locpriv/rng.hpp"

namespace locpriv {

// Slack used whenever a distance is compared against a flexibility radius.
// Grid points sit at exact binary fractions only sometimes; this absorbs the
// rounding in `(k + 0.5) / M` without changing any real decision.
inline constexpr double kCoverTol = 1e-12;

// A location in the normalized domain. One-dimensional locations keep y = 0.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(double a, double b) noexcept { return std::abs(a - b); }

inline double distance(const Point& a, const Point& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Lexicographic "a before b", used for deterministic tie-breaking.
inline bool lex_less(const Point& a, const Point& b) noexcept {
  return a.x < b.x || (a.x == b.x && a.y < b.y);
}

inline bool in_unit_domain(double v) noexcept { return v >= 0.0 && v <= 1.0; }

// Two-point reflection of one coordinate. Both outputs stay in [0, 1]: the
// absolute values fold a report that would leave the interval back inside.
struct Reflection {
  double left;
  double right;
};

inline Reflection reflect_query(double x, double r) noexcept {
  return {std::abs(x - r), 1.0 - std::abs(x - 1.0 + r)};
}

// Uniform discretization of [0,1] or [0,1]^2 into cells; points are the cell
// centers. 2D points are stored row-major: index = iy * M + ix.
class LocationGrid {
 public:
  LocationGrid(int dimension, int resolution) : dimension_(dimension), resolution_(resolution) {
    if (dimension != 1 && dimension != 2) {
      throw std::invalid_argument("grid dimension must be 1 or 2");
    }
    if (resolution < 1) throw std::invalid_argument("grid resolution must be positive");
    points_.reserve(size());
    if (dimension == 1) {
      for (int k = 0; k < resolution; ++k) points_.push_back({axis_center(k), 0.0});
    } else {
      for (int iy = 0; iy < resolution; ++iy) {
        for (int ix = 0; ix < resolution; ++ix) points_.push_back({axis_center(ix), axis_center(iy)});
      }
    }
  }

  static LocationGrid line(int resolution) { return LocationGrid(1, resolution); }
  static LocationGrid square(int resolution) { return LocationGrid(2, resolution); }

  int dimension() const noexcept { return dimension_; }
  int resolution() const noexcept { return resolution_; }
  std::size_t size() const noexcept {
    return dimension_ == 1 ? static_cast<std::size_t>(resolution_)
                           : static_cast<std::size_t>(resolution_) * resolution_;
  }
  double spacing() const noexcept { return 1.0 / resolution_; }

  double axis_center(int k) const noexcept { return (k + 0.5) / resolution_; }

  // Cell index along one axis for a coordinate in [0,1].
  int axis_cell(double v) const noexcept {
    int k = static_cast<int>(std::floor(v * resolution_));
    return std::clamp(k, 0, resolution_ - 1);
  }

  const Point& point(std::size_t i) const { return points_.at(i); }
  std::span<const Point> points() const noexcept { return points_; }

  // Index of the grid point at `p`, or -1 if `p` is not a cell center
  // (within `tol` per axis).
  long find(const Point& p, double tol = 1e-9) const noexcept {
    auto axis_index = [&](double v) -> long {
      double k = v * resolution_ - 0.5;
      double rk = std::round(k);
      if (rk < 0 || rk >= resolution_) return -1;
      if (std::abs(axis_center(static_cast<int>(rk)) - v) > tol) return -1;
      return static_cast<long>(rk);
    };
    long ix = axis_index(p.x);
    if (ix < 0) return -1;
    if (dimension_ == 1) return std::abs(p.y) <= tol ? ix : -1;
    long iy = axis_index(p.y);
    if (iy < 0) return -1;
    return iy * resolution_ + ix;
  }

  friend bool operator==(const LocationGrid& a, const LocationGrid& b) noexcept {
    return a.dimension_ == b.dimension_ && a.resolution_ == b.resolution_;
  }

 private:
  int dimension_;
  int resolution_;
  std::vector<Point> points_;
};

// Prior location distribution: one mass per grid cell, summing to 1. The same
// masses also define a piecewise-constant density over the continuum, which
// the closed-form/lattice schemes and the simulator use.
class Prior {
 public:
  Prior(LocationGrid grid, std::vector<double> mass) : grid_(std::move(grid)), mass_(std::move(mass)) {
    if (mass_.size() != grid_.size()) {
      throw std::invalid_argument("prior has " + std::to_string(mass_.size()) + " masses for " +
                                  std::to_string(grid_.size()) + " grid points");
    }
    double total = 0.0;
    for (double m : mass_) {
      if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("prior mass must be finite and nonnegative");
      total += m;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("prior masses sum to " + std::to_string(total) + ", expected 1");
    }
    build_cdf();
  }

  static Prior uniform(const LocationGrid& grid) {
    return Prior(grid, std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size())));
  }

  // Normalizes arbitrary nonnegative weights.
  static Prior from_weights(const LocationGrid& grid, std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("prior weight must be finite and nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("prior weights are all zero");
    // Equal weights must give the exact uniform prior, which the weighted
    // inference modes detect.
    if (std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights.front(); })) return uniform(grid);
    for (double& w : weights) w /= total;
    // Renormalizing can leave the sum a few ulps off; push the residue onto
    // the largest entry so the constructor's 1e-12 check is met exactly.
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    auto it = std::max_element(weights.begin(), weights.end());
    *it += 1.0 - sum;
    return Prior(grid, std::move(weights));
  }

  const LocationGrid& grid() const noexcept { return grid_; }
  std::span<const double> masses() const noexcept { return mass_; }
  double mass(std::size_t i) const { return mass_.at(i); }

  bool is_uniform() const noexcept {
    return std::all_of(mass_.begin(), mass_.end(), [&](double m) { return m == mass_.front(); });
  }

  // --- continuum view -------------------------------------------------------

  // Density at a 1D coordinate (or a 2D point).
  double density(double x) const noexcept {
    return mass_[static_cast<std::size_t>(grid_.axis_cell(x))] * grid_.resolution();
  }
  double density(const Point& p) const noexcept {
    if (grid_.dimension() == 1) return density(p.x);
    const int m = grid_.resolution();
    std::size_t i = static_cast<std::size_t>(grid_.axis_cell(p.y)) * m + grid_.axis_cell(p.x);
    return mass_[i] * m * m;
  }

  // Marginal density of the x (axis 0) or y (axis 1) coordinate in 2D.
  double marginal_density(int axis, double v) const noexcept {
    if (grid_.dimension() == 1) return density(v);
    const int m = grid_.resolution();
    const int k = grid_.axis_cell(v);
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      std::size_t i = axis == 0 ? static_cast<std::size_t>(j) * m + k : static_cast<std::size_t>(k) * m + j;
      s += mass_[i];
    }
    return s * m;
  }

  // Inverse CDF of the 1D piecewise-constant density: monotone in u.
  double sample_1d(double u) const noexcept {
    const std::size_t cell = pick_cell(u);
    const double lo = cdf_[cell];
    const double within = mass_[cell] > 0.0 ? (u - lo) / mass_[cell] : 0.5;
    return (cell + std::clamp(within, 0.0, 1.0)) / grid_.resolution();
  }

  // 2D sample: `u` picks the cell, (ux, uy) the offset inside it.
  Point sample_2d(double u, double ux, double uy) const noexcept {
    const std::size_t cell = pick_cell(u);
    const int m = grid_.resolution();
    const int ix = static_cast<int>(cell % m);
    const int iy = static_cast<int>(cell / m);
    return {(ix + ux) / m, (iy + uy) / m};
  }

  std::size_t pick_cell(double u) const noexcept {
    auto it = std::upper_bound(cdf_.begin() + 1, cdf_.end(), u);
    std::size_t cell = static_cast<std::size_t>(std::distance(cdf_.begin() + 1, it));
    cell = std::min(cell, mass_.size() - 1);
    // Skip zero-mass cells that only tie on the cumulative boundary.
    while (mass_[cell] == 0.0 && cell + 1 < mass_.size()) ++cell;
    while (mass_[cell] == 0.0 && cell > 0) --cell;
    return cell;
  }

  // Integrals of the 1D density over [a, b]: mass and first moment.
  double mass_between(double a, double b) const noexcept { return integrate(a, b, 0); }
  double moment_between(double a, double b) const noexcept { return integrate(a, b, 1); }

  // \int_a^b psi(x) |x - c| dx.
  double abs_moment_between(double a, double b, double c) const noexcept {
    if (b <= a) return 0.0;
    double s = 0.0;
    if (a < c) {
      double hi = std::min(b, c);
      s += c * integrate(a, hi, 0) - integrate(a, hi, 1);
    }
    if (b > c) {
      double lo = std::max(a, c);
      s += integrate(lo, b, 1) - c * integrate(lo, b, 0);
    }
    return s;
  }

 private:
  void build_cdf() {
    cdf_.assign(mass_.size() + 1, 0.0);
    for (std::size_t i = 0; i < mass_.size(); ++i) cdf_[i + 1] = cdf_[i] + mass_[i];
  }

  // order 0: \int psi, order 1: \int x psi, over [a, b] on the 1D density.
  double integrate(double a, double b, int order) const noexcept {
    a = std::clamp(a, 0.0, 1.0);
    b = std::clamp(b, 0.0, 1.0);
    if (b <= a) return 0.0;
    const int m = grid_.resolution();
    const int ka = grid_.axis_cell(a);
    const int kb = grid_.axis_cell(b);
    double s = 0.0;
    for (int k = ka; k <= kb; ++k) {
      double lo = std::max(a, static_cast<double>(k) / m);
      double hi = std::min(b, static_cast<double>(k + 1) / m);
      if (hi <= lo) continue;
      double d = mass_[static_cast<std::size_t>(k)] * m;
      s += order == 0 ? d * (hi - lo) : d * 0.5 * (hi * hi - lo * lo);
    }
    return s;
  }

  LocationGrid grid_;
  std::vector<double> mass_;
  std::vector<double> cdf_;
};

// Service flexibility Q plus the prior the adversary also knows.
struct UserProfile {
  double flexibility;
  Prior prior;

  UserProfile(double q, Prior p) : flexibility(q), prior(std::move(p)) {
    if (!(q >= 0.0 && q <= 0.5)) {
      throw std::invalid_argument("service flexibility must lie in [0, 0.5], got " + std::to_string(q));
    }
  }
};

// --- the crowdsourced cache ---------------------------------------------------

// One cached query: the reported location and the opaque PoI payload the
// platform returned for it.
struct CacheEntry {
  Point location;
  std::string payload;
};

// Cached queries in query order.
class CacheState {
 public:
  CacheState() = default;

  static CacheState of(std::span<const double> locations) {
    CacheState c;
    for (double x : locations) c.push({x, 0.0});
    return c;
  }
  static CacheState of(std::initializer_list<double> locations) {
    return of(std::span<const double>(locations.begin(), locations.size()));
  }
  static CacheState of_points(std::span<const Point> locations) {
    CacheState c;
    for (const Point& p : locations) c.push(p);
    return c;
  }

  void push(Point location, std::string payload = {}) {
    if (!in_unit_domain(location.x) || !in_unit_domain(location.y)) {
      throw std::invalid_argument("cache location outside the normalized domain");
    }
    if (payload.empty()) payload = "poi#" + std::to_string(entries_.size());
    entries_.push_back({location, std::move(payload)});
  }

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const CacheEntry> entries() const noexcept { return entries_; }

  CacheState mirrored() const {
    CacheState c;
    for (const auto& e : entries_) c.push({1.0 - e.location.x, e.location.y}, e.payload);
    return c;
  }

 private:
  std::vector<CacheEntry> entries_;
};

// Grid points within Q of some cached query. Mask is indexed like the grid.
inline std::vector<bool> covered_set(const CacheState& cache, double q, const LocationGrid& grid) {
  if (!(q >= 0.0)) throw std::invalid_argument("flexibility must be nonnegative");
  std::vector<bool> mask(grid.size(), false);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point& p = grid.point(i);
    for (const auto& e : cache.entries()) {
      if (distance(p, e.location) <= q + kCoverTol) {
        mask[i] = true;
        break;
      }
    }
  }
  return mask;
}

// Covered set of the 1D continuum: a sorted union of disjoint closed
// intervals clipped to [0,1].
class CoveredIntervals {
 public:
  struct Interval {
    double lo;
    double hi;
  };

  CoveredIntervals() = default;

  CoveredIntervals(const CacheState& cache, double q) {
    std::vector<Interval> raw;
    raw.reserve(cache.size());
    for (const auto& e : cache.entries()) {
      raw.push_back({std::max(0.0, e.location.x - q - kCoverTol), std::min(1.0, e.location.x + q + kCoverTol)});
    }
    std::sort(raw.begin(), raw.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (const auto& iv : raw) {
      if (!intervals_.empty() && iv.lo <= intervals_.back().hi) {
        intervals_.back().hi = std::max(intervals_.back().hi, iv.hi);
      } else {
        intervals_.push_back(iv);
      }
    }
  }

  bool empty() const noexcept { return intervals_.empty(); }
  bool full() const noexcept {
    return intervals_.size() == 1 && intervals_.front().lo <= 0.0 && intervals_.front().hi >= 1.0;
  }
  std::span<const Interval> intervals() const noexcept { return intervals_; }

  bool contains(double x) const noexcept {
    // First interval whose hi >= x.
    auto it = std::lower_bound(intervals_.begin(), intervals_.end(), x,
                               [](const Interval& iv, double v) { return iv.hi < v; });
    return it != intervals_.end() && it->lo <= x;
  }

  double measure() const noexcept {
    double s = 0.0;
    for (const auto& iv : intervals_) s += iv.hi - iv.lo;
    return s;
  }

 private:
  std::vector<Interval> intervals_;
};

// Covered set of the 2D continuum: union of discs of radius Q.
class CoveredDiscs {
 public:
  CoveredDiscs() = default;
  CoveredDiscs(const CacheState& cache, double q) : q_(q) {
    for (const auto& e : cache.entries()) centers_.push_back(e.location);
  }

  bool empty() const noexcept { return centers_.empty(); }
  bool contains(const Point& p) const noexcept {
    for (const auto& c : centers_) {
      if (distance(p, c) <= q_ + kCoverTol) return true;
    }
    return false;
  }

 private:
  double q_ = 0.0;
  std::vector<Point> centers_;
};

// --- flexibility sampling -------------------------------------------------------

inline constexpr double kMaxFlexibility = 0.5;

// Draws Q from normal(mu, sigma) truncated to [0, 0.5] by rejection.
inline double sample_flexibility(double mu, double sigma, Engine& engine) {
  if (!(mu >= -1.0 && mu <= 1.0)) {
    throw std::invalid_argument("flexibility mean must lie in [-1, 1], got " + std::to_string(mu));
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("flexibility sigma must be positive");
  std::normal_distribution<double> normal(mu, sigma);
  constexpr int kMaxAttempts = 10'000'000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    double q = normal(engine);
    if (q >= 0.0 && q <= kMaxFlexibility) return q;
  }
  throw std::invalid_argument("truncated normal acceptance rate too low for mu=" + std::to_string(mu) +
                              ", sigma=" + std::to_string(sigma));
}

}  // namespace locpriv
