#pragma once

// The four-point reflection defense on the unit square: one shared r_in for
// both axes, per-axis inversion, and the lattice search over r_in.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "locpriv/adversary.hpp"
#include "locpriv/approx.hpp"
#include "locpriv/core.hpp"

namespace locpriv {

inline Point reflect_point(const Point& x, double r, bool right_x, bool right_y) noexcept {
  const Reflection fx = reflect_query(x.x, r);
  const Reflection fy = reflect_query(x.y, r);
  return {right_x ? fx.right : fx.left, right_y ? fy.right : fy.left};
}

// A cell of the K x K lattice counts as covered for memo purposes only if it
// lies inside a single disc; all four corners inside one disc suffices.
inline bool discs_cover_square(const CacheState& cache, double q, int cells) {
  if (cache.empty()) return false;
  const double r2 = (q + kCoverTol) * (q + kCoverTol);
  auto inside = [&](const Point& c, double x, double y) { return (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= r2; };
  for (int iy = 0; iy < cells; ++iy) {
    for (int ix = 0; ix < cells; ++ix) {
      const double x0 = static_cast<double>(ix) / cells, x1 = static_cast<double>(ix + 1) / cells;
      const double y0 = static_cast<double>(iy) / cells, y1 = static_cast<double>(iy + 1) / cells;
      bool ok = false;
      for (const auto& e : cache.entries()) {
        const Point& c = e.location;
        if (inside(c, x0, y0) && inside(c, x1, y0) && inside(c, x0, y1) && inside(c, x1, y1)) {
          ok = true;
          break;
        }
      }
      if (!ok) return false;
    }
  }
  return true;
}

// Four-point scheme evaluated on a K x K lattice of reports. Covered
// candidates for lattice r_in are lattice cells; uncovered candidates under
// r_out are exact continuum points.
class Lattice2d {
 public:
  Lattice2d(const CacheState& cache, double q, const Prior& prior, double epsilon, InferenceMode mode)
      : k_(lattice_cells(epsilon)), r_out_(std::min(q, 0.5)), prior_(&prior), mode_(mode), cov_(cache, q) {
    if (prior.grid().dimension() != 2) throw std::invalid_argument("Lattice2d needs a 2D prior");
    const std::size_t n = static_cast<std::size_t>(k_) * k_;
    covered_.resize(n);
    psi_.resize(n);
    mx_.resize(k_);
    my_.resize(k_);
    for (int c = 0; c < k_; ++c) {
      mx_[c] = prior.marginal_density(0, (c + 0.5) / k_);
      my_[c] = prior.marginal_density(1, (c + 0.5) / k_);
    }
    for (int iy = 0; iy < k_; ++iy) {
      for (int ix = 0; ix < k_; ++ix) {
        const Point p{(ix + 0.5) / k_, (iy + 0.5) / k_};
        const std::size_t i = static_cast<std::size_t>(iy) * k_ + ix;
        covered_[i] = cov_.contains(p);
        psi_[i] = prior.density(p);
        any_covered_ = any_covered_ || covered_[i];
      }
    }
    full_ = discs_cover_square(cache, q, k_);
    out_.resize(n);
    std::vector<Preimages> axis(k_);
    for (int k = 0; k < k_; ++k) axis[k] = invert_reflection((k + 0.5) / k_, r_out_);
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        auto& list = out_[static_cast<std::size_t>(ky) * k_ + kx];
        for (const Preimage& a : axis[kx]) {
          for (const Preimage& b : axis[ky]) {
            const Point p{a.location, b.location};
            if (cov_.contains(p)) continue;
            list.push_back({p, prior.density(p), a.likelihood * b.likelihood, prior.marginal_density(0, p.x),
                            prior.marginal_density(1, p.y)});
          }
        }
      }
    }
  }

  int cells() const noexcept { return k_; }
  double r_out() const noexcept { return r_out_; }
  double r_value(int j) const noexcept { return static_cast<double>(j) / k_; }
  bool none_covered() const noexcept { return !any_covered_; }
  bool fully_covered() const noexcept { return full_; }

  double privacy(int j) const {
    const auto s = sums(j);
    return s.den > 0.0 ? s.num / s.den : 0.0;
  }

  Lattice1d::Sums sums(std::optional<int> j) const {
    Lattice1d::Sums s;
    std::vector<detail::LatticePreimages> in(k_);
    if (j && any_covered_) {
      for (int k = 0; k < k_; ++k) detail::lattice_preimages(k_, k, *j, in[k]);
    }
    std::vector<Cand> c;
    c.reserve(32);
    CandidateSet2 full;
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        c = out_[static_cast<std::size_t>(ky) * k_ + kx];
        if (j && any_covered_) {
          for (int a = 0; a < in[kx].n; ++a) {
            for (int b = 0; b < in[ky].n; ++b) {
              const int cx = in[kx].cell[a], cy = in[ky].cell[b];
              const std::size_t i = static_cast<std::size_t>(cy) * k_ + cx;
              if (!covered_[i]) continue;
              c.push_back({{(cx + 0.5) / k_, (cy + 0.5) / k_}, psi_[i], in[kx].lik[a] * in[ky].lik[b], mx_[cx], my_[cy]});
            }
          }
        }
        double mass = 0.0;
        for (const Cand& e : c) mass += e.psi * e.lik;
        if (!(mass > 0.0)) continue;  // report never emitted
        Point guess;
        if (mode_ == InferenceMode::exact_bayes) {
          full.clear();
          for (const Cand& e : c) full.push_back({e.p, e.lik, false});
          guess = scheme_inference_2d(full, *prior_, mode_);
        } else {
          guess = {axis_guess(c, 0), axis_guess(c, 1)};
        }
        for (const Cand& e : c) {
          const double w = e.psi * e.lik;
          s.num += w * distance(e.p, guess);
          s.den += w;
        }
      }
    }
    return s;
  }

 private:
  struct Cand {
    Point p;
    double psi, lik, mx, my;
  };

  // Mean of the distinct projected candidate coordinates, weighted by the
  // prior marginal in weighted-mean mode. Matches scheme_inference_2d.
  double axis_guess(const std::vector<Cand>& c, int axis) const {
    double v[32] = {}, w[32] = {};
    int n = 0;
    for (const Cand& e : c) {
      const double x = axis == 0 ? e.p.x : e.p.y;
      bool dup = false;
      for (int i = 0; i < n && !dup; ++i) dup = std::abs(v[i] - x) <= kCandidateTol;
      if (dup) continue;
      v[n] = x;
      w[n++] = axis == 0 ? e.mx : e.my;
    }
    // Same summation order as the sorted distinct values in the generic path.
    for (int a = 1; a < n; ++a) {
      for (int b = a; b > 0 && v[b] < v[b - 1]; --b) {
        std::swap(v[b], v[b - 1]);
        std::swap(w[b], w[b - 1]);
      }
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += v[i];
    const double plain = s / n;
    if (mode_ == InferenceMode::plain_mean) return plain;
    bool equal = true;
    for (int i = 1; i < n; ++i) equal = equal && w[i] == w[0];
    if (equal) {
      if (!(w[0] > 0.0)) throw ImpossibleObservation("candidate axis has zero marginal mass");
      return plain;
    }
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      num += w[i] * v[i];
      den += w[i];
    }
    return num / den;
  }

  int k_;
  double r_out_;
  const Prior* prior_;
  InferenceMode mode_;
  CoveredDiscs cov_;
  std::vector<char> covered_;
  std::vector<double> psi_;
  std::vector<double> mx_, my_;
  std::vector<std::vector<Cand>> out_;
  bool any_covered_ = false;
  bool full_ = false;
};

inline Algorithm1Result algorithm2_scan(const Lattice2d& lat) {
  Algorithm1Result best{{0.0, lat.r_out()}, lat.privacy(0), 0};
  if (lat.none_covered()) return best;
  for (int j = 1; j <= lat.cells(); ++j) {
    const double p = lat.privacy(j);
    if (p > best.pi + 1e-12 * std::max(1.0, best.pi)) best = {{lat.r_value(j), lat.r_out()}, p, j};
  }
  return best;
}

// `memo` must only be shared between calls with the same 2D prior.
inline Algorithm1Result algorithm2_optimize_r_in_2d(const CacheState& cache, const UserProfile& profile, double epsilon,
                                                    InferenceMode mode, FullCoverageMemo* memo = nullptr) {
  const Lattice2d lat(cache, profile.flexibility, profile.prior, epsilon, mode);
  if (memo && lat.fully_covered()) {
    Algorithm1Result r = memo->get(lat.cells(), mode, [&] { return algorithm2_scan(lat); });
    r.params.r_out = lat.r_out();
    return r;
  }
  return algorithm2_scan(lat);
}

struct SilentInference2 {
  Point guess;
  double num = 0.0;
  double mass = 0.0;
};

// Silent-user inference in 2D, integrated cell by cell on the K x K lattice.
inline SilentInference2 silent_inference_2d(const CacheState& cache, double q, const Prior& prior, int cells,
                                           InferenceMode mode) {
  const CoveredDiscs cov(cache, q);
  CandidateSet2 pts;
  std::vector<double> w;
  SilentInference2 s;
  const double area = 1.0 / (static_cast<double>(cells) * cells);
  for (int iy = 0; iy < cells; ++iy) {
    for (int ix = 0; ix < cells; ++ix) {
      const Point p{(ix + 0.5) / cells, (iy + 0.5) / cells};
      if (!cov.contains(p)) continue;
      const double m = prior.density(p) * area;
      if (m <= 0.0) continue;
      pts.push_back({p, 1.0, true});
      w.push_back(m);
      s.mass += m;
    }
  }
  if (!(s.mass > 0.0)) return s;
  Point guess{0.0, 0.0};
  if (mode == InferenceMode::plain_mean) {
    for (const auto& c : pts) guess = {guess.x + c.location.x, guess.y + c.location.y};
    guess = {guess.x / pts.size(), guess.y / pts.size()};
  } else {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      guess = {guess.x + w[i] * pts[i].location.x, guess.y + w[i] * pts[i].location.y};
    }
    guess = {guess.x / s.mass, guess.y / s.mass};
    if (mode == InferenceMode::exact_bayes) {
      Point p = guess;
      double best = detail::weighted_distance_sum(pts, w, p);
      for (int it = 0; it < 200; ++it) {
        double sx = 0.0, sy = 0.0, sw = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double d = distance(pts[i].location, p);
          if (d < 1e-14) continue;
          sx += w[i] * pts[i].location.x / d;
          sy += w[i] * pts[i].location.y / d;
          sw += w[i] / d;
        }
        if (!(sw > 0.0)) break;
        const Point next{sx / sw, sy / sw};
        const double cost = detail::weighted_distance_sum(pts, w, next);
        if (cost < best) {
          best = cost;
          guess = next;
        }
        if (distance(next, p) < 1e-13) break;
        p = next;
      }
    }
  }
  s.guess = guess;
  s.num = detail::weighted_distance_sum(pts, w, guess);
  return s;
}

}  // namespace locpriv
