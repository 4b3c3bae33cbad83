#pragma once

// The two-point reflection defense in 1D: closed forms for the first and
// second user, the grid and lattice evaluators of the scheme's expected
// privacy, and the lattice search for r_in.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "locpriv/adversary.hpp"
#include "locpriv/core.hpp"

namespace locpriv {

struct ObfuscationParams {
  double r_in;
  double r_out;
};

struct FirstUserParams {
  double r_out;
  double pi;
};

inline FirstUserParams first_user_params(double q) {
  if (!(q >= 0.0 && q <= 0.5)) throw std::invalid_argument("flexibility must lie in [0, 0.5]");
  return {std::min(q, 0.5), std::min(q - q * q, 0.25)};
}

// Closed-form r_in for the second user, valid for Q2 < 1/11.
inline double second_user_r_in(double x1p, double q2) {
  if (!(q2 >= 0.0 && q2 < 1.0 / 11.0)) {
    throw std::domain_error("closed-form r_in needs Q2 < 1/11; use the lattice search (algorithm1_optimize_r_in)");
  }
  if (!in_unit_domain(x1p)) throw std::invalid_argument("first report must lie in [0, 1]");
  if (x1p <= q2) return 1.0 - q2;
  if (x1p <= 0.5) return 1.0 - x1p;
  if (x1p <= 1.0 - q2) return x1p;
  return 1.0 - q2;
}

enum class Pi2Variant { appr, hide };

// Second-user privacy polynomials, as published. Advisory only: they are
// not consistent with the simulated scheme (see the tests). Arguments above
// 1/2 are mirrored. At x1' = Q the hide variant uses its middle branch.
inline double closed_form_pi2(double x1p, double q, Pi2Variant variant) {
  if (!(q >= 0.0 && q <= 1.0 / 11.0)) throw std::domain_error("closed-form second-user privacy needs Q <= 1/11");
  if (!in_unit_domain(x1p)) throw std::invalid_argument("first report must lie in [0, 1]");
  const double x = x1p > 0.5 ? 1.0 - x1p : x1p;
  if (variant == Pi2Variant::appr) {
    if (x <= q) return (5 * q - 10 * q * x + 2 * x - 47.0 / 4.0 * q * q - 9.0 / 4.0 * x * x) / 2.0;
    return (1 - 3 * q * q + 2 * q - 7 * x * q - x) / 2.0;
  }
  if (x < q) return q * (1 - 2 * q - x / 2.0) + (x + q) / 4.0;
  if (x <= 2 * q) return (2 * q - 5 * q * q - 2 * q * x) / 2.0;
  return (2 * q + 2 * q * x - q * q - x * x) / 2.0;
}

// --- grid evaluator ------------------------------------------------------------------

struct ObservationTrace {
  double report;
  std::vector<Candidate> candidates;
  double inference;
  double probability;  // Pr(report)
  double error;        // expected distance given the report
};

struct SchemeEvaluation {
  ObfuscationParams params;
  double pi = 0.0;
  std::vector<ObservationTrace> observations;
};

// Exact privacy of the two-point scheme when real locations are the grid
// points: every grid x emits its two reflections, each observed report is
// inverted to its grid candidates, and errors are averaged with psi weights.
inline SchemeEvaluation evaluate_scheme_1d(const ObfuscationParams& params, const CacheState& cache,
                                           const UserProfile& profile, const LocationGrid& grid, InferenceMode mode) {
  if (grid.dimension() != 1) throw std::invalid_argument("evaluate_scheme_1d needs a 1D grid");
  if (!(profile.prior.grid() == grid)) throw std::invalid_argument("profile prior lives on a different grid");
  const double q = profile.flexibility;
  const CoveredIntervals cov(cache, q);
  std::optional<double> r_in;
  if (!cov.empty()) r_in.emplace(params.r_in);

  std::map<std::int64_t, double> reports;  // keyed on 1e-9 units
  for (const Point& p : grid.points()) {
    const double r = cov.contains(p.x) ? params.r_in : params.r_out;
    const Reflection f = reflect_query(p.x, r);
    for (double xp : {f.left, f.right}) reports.emplace(std::llround(xp * 1e9), xp);
  }
  SchemeEvaluation ev{params, 0.0, {}};
  for (const auto& [key, xp] : reports) {
    CandidateSet cands = candidate_set(r_in, params.r_out, xp, cache, q, grid);
    std::vector<double> w;
    double num = 0.0, den = 0.0;
    for (const auto& c : cands) {
      w.push_back(profile.prior.mass(static_cast<std::size_t>(grid.find({c.location, 0.0}))) * c.likelihood);
      den += w.back();
    }
    if (!(den > 0.0)) continue;  // only zero-mass locations emit it
    const double guess = scheme_inference(cands, profile.prior, mode);
    for (std::size_t i = 0; i < cands.size(); ++i) num += w[i] * std::abs(cands[i].location - guess);
    ev.pi += num;
    ev.observations.push_back({xp, std::move(cands), guess, den, den > 0.0 ? num / den : 0.0});
  }
  return ev;
}

// --- lattice evaluator ------------------------------------------------------------------

// Number of lattice cells for a step epsilon; the lattice spacing is
// 1 / round(1 / epsilon).
inline int lattice_cells(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 0.1)) throw std::invalid_argument("epsilon must lie in (0, 0.1]");
  return static_cast<int>(std::lround(1.0 / epsilon));
}

namespace detail {

struct LatticePreimages {
  int cell[4];
  double lik[4];
  int n = 0;
};

// Preimages of report (k + 1/2) / K under r = j / K, as lattice cells. In
// half-cell units every quantity is an integer, so the inversion is exact.
inline void lattice_preimages(int cells, int k, int j, LatticePreimages& out) {
  out.n = 0;
  const long big = 2L * cells, hx = 2L * k + 1, hr = 2L * j;
  const long sol[4] = {hr + hx, hr - hx, 2 * big - hr - hx, hx - hr};
  long seen[4];
  int ns = 0;
  for (long h : sol) {
    if (h <= 0 || h >= big) continue;
    bool dup = false;
    for (int s = 0; s < ns; ++s) dup = dup || seen[s] == h;
    if (dup) continue;
    seen[ns++] = h;
    double lik = 0.0;
    if (std::labs(h - hr) == hx) lik += 0.5;
    if (big - std::labs(h - big + hr) == hx) lik += 0.5;
    if (lik == 0.0) continue;
    out.cell[out.n] = static_cast<int>((h - 1) / 2);
    out.lik[out.n++] = lik;
  }
}

}  // namespace detail

// Covered-set inference for a user who stays silent: the attacker only
// learns x is covered. `num` is the unnormalized error integral.
struct SilentInference {
  double guess = 0.0;
  double num = 0.0;
  double mass = 0.0;
};

inline SilentInference silent_inference(const CoveredIntervals& cov, const Prior& prior, InferenceMode mode) {
  SilentInference s;
  for (const auto& iv : cov.intervals()) s.mass += prior.mass_between(iv.lo, iv.hi);
  if (!(s.mass > 0.0)) return s;
  if (mode == InferenceMode::weighted_mean) {
    double m1 = 0.0;
    for (const auto& iv : cov.intervals()) m1 += prior.moment_between(iv.lo, iv.hi);
    s.guess = m1 / s.mass;
  } else if (mode == InferenceMode::plain_mean) {
    double m1 = 0.0;
    for (const auto& iv : cov.intervals()) m1 += 0.5 * (iv.hi * iv.hi - iv.lo * iv.lo);
    s.guess = m1 / cov.measure();
  } else {
    auto below = [&](double t) {
      double m = 0.0;
      for (const auto& iv : cov.intervals()) m += prior.mass_between(iv.lo, std::min(iv.hi, t));
      return m;
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (below(mid) >= 0.5 * s.mass ? hi : lo) = mid;
    }
    s.guess = hi;
  }
  for (const auto& iv : cov.intervals()) s.num += prior.abs_moment_between(iv.lo, iv.hi, s.guess);
  return s;
}

// Expected privacy of the two-point scheme over the continuum, evaluated on
// an epsilon-lattice of reports x' = (k + 1/2) / K. Lattice values of r_in
// are j / K, so covered candidates are themselves lattice points and their
// inversion is integer arithmetic in half-cell units.
class Lattice1d {
 public:
  struct Sums {
    double num = 0.0;  // sum of psi * likelihood * error
    double den = 0.0;  // sum of psi * likelihood
  };

  Lattice1d(const CacheState& cache, double q, const Prior& prior, double epsilon, InferenceMode mode)
      : k_(lattice_cells(epsilon)), r_out_(std::min(q, 0.5)), prior_(&prior), mode_(mode), cov_(cache, q) {
    if (prior.grid().dimension() != 1) throw std::invalid_argument("Lattice1d needs a 1D prior");
    covered_.resize(k_);
    psi_.resize(k_);
    any_covered_ = false;
    for (int c = 0; c < k_; ++c) {
      const double x = (c + 0.5) / k_;
      covered_[c] = cov_.contains(x);
      psi_[c] = prior.density(x);
      any_covered_ = any_covered_ || covered_[c];
    }
    out_.resize(k_);
    for (int k = 0; k < k_; ++k) {
      const double xp = (k + 0.5) / k_;
      for (const Preimage& p : invert_reflection(xp, r_out_)) {
        if (!cov_.contains(p.location)) out_[k].push_back({p.location, prior.density(p.location), p.likelihood});
      }
    }
  }

  int cells() const noexcept { return k_; }
  double r_out() const noexcept { return r_out_; }
  double r_value(int j) const noexcept { return static_cast<double>(j) / k_; }
  // No lattice cell is covered; r_in cannot matter.
  bool none_covered() const noexcept { return !any_covered_; }
  // The continuum is covered, so the cache no longer matters.
  bool fully_covered() const noexcept { return cov_.full(); }
  const CoveredIntervals& covered() const noexcept { return cov_; }

  // Lattice sums for r_in = j / K; no r_in (hiding) drops covered candidates.
  Sums sums(std::optional<int> j) const {
    Sums s;
    Small c;
    for (int k = 0; k < k_; ++k) {
      gather(k, j, c);
      double mass = 0.0;
      for (std::size_t i = 0; i < c.n; ++i) mass += c.psi[i] * c.lik[i];
      if (!(mass > 0.0)) continue;  // report never emitted
      const double guess = detail::infer_1d({c.loc.data(), c.n}, {c.psi.data(), c.n}, {c.lik.data(), c.n}, mode_);
      for (std::size_t i = 0; i < c.n; ++i) {
        const double w = c.psi[i] * c.lik[i];
        s.num += w * std::abs(c.loc[i] - guess);
        s.den += w;
      }
    }
    return s;
  }

  // Expected privacy of the full scheme with r_in = j / K.
  double privacy(int j) const {
    const Sums s = sums(j);
    return s.den > 0.0 ? s.num / s.den : 0.0;
  }

  // Expected privacy of the hiding baseline: silent when covered, r_out
  // reflection otherwise.
  double hiding_privacy() const {
    const SilentInference silent = silent_inference(cov_, *prior_, mode_);
    const Sums s = sums(std::nullopt);
    const double out = s.den > 0.0 ? s.num / s.den : 0.0;
    return (1.0 - silent.mass) * out + silent.num;
  }

  std::vector<ObservationTrace> trace(int j) const {
    std::vector<ObservationTrace> t;
    Small c;
    for (int k = 0; k < k_; ++k) {
      gather(k, j, c);
      ObservationTrace o{(k + 0.5) / k_, {}, 0.0, 0.0, 0.0};
      double mass = 0.0;
      for (std::size_t i = 0; i < c.n; ++i) mass += c.psi[i] * c.lik[i];
      if (mass > 0.0) {
        o.inference = detail::infer_1d({c.loc.data(), c.n}, {c.psi.data(), c.n}, {c.lik.data(), c.n}, mode_);
        double num = 0.0;
        for (std::size_t i = 0; i < c.n; ++i) {
          o.candidates.push_back({c.loc[i], c.lik[i], cov_.contains(c.loc[i])});
          num += c.psi[i] * c.lik[i] * std::abs(c.loc[i] - o.inference);
          o.probability += c.psi[i] * c.lik[i];
        }
        o.error = o.probability > 0.0 ? num / o.probability : 0.0;
        o.probability /= k_;
      }
      t.push_back(std::move(o));
    }
    return t;
  }

 private:
  struct Out {
    double loc, psi, lik;
  };
  struct Small {
    std::array<double, 8> loc{}, psi{}, lik{};
    std::size_t n = 0;
  };

  void gather(int k, std::optional<int> j, Small& c) const {
    c.n = 0;
    for (const Out& o : out_[k]) {
      c.loc[c.n] = o.loc;
      c.psi[c.n] = o.psi;
      c.lik[c.n++] = o.lik;
    }
    if (j && any_covered_) {
      detail::LatticePreimages pre;
      detail::lattice_preimages(k_, k, *j, pre);
      for (int s = 0; s < pre.n; ++s) {
        const int cell = pre.cell[s];
        if (!covered_[cell]) continue;
        c.loc[c.n] = (cell + 0.5) / k_;
        c.psi[c.n] = psi_[cell];
        c.lik[c.n++] = pre.lik[s];
      }
    }
    // Insertion sort; at most eight entries.
    for (std::size_t a = 1; a < c.n; ++a) {
      for (std::size_t b = a; b > 0 && c.loc[b] < c.loc[b - 1]; --b) {
        std::swap(c.loc[b], c.loc[b - 1]);
        std::swap(c.psi[b], c.psi[b - 1]);
        std::swap(c.lik[b], c.lik[b - 1]);
      }
    }
  }

  int k_;
  double r_out_;
  const Prior* prior_;
  InferenceMode mode_;
  CoveredIntervals cov_;
  std::vector<char> covered_;
  std::vector<double> psi_;
  std::vector<std::vector<Out>> out_;
  bool any_covered_ = false;
};

struct Algorithm1Result {
  ObfuscationParams params;
  double pi = 0.0;
  int r_index = 0;
};

// Memo for the fully covered case, where the optimum depends only on the
// prior, the lattice and the inference mode. Safe to share across threads.
class FullCoverageMemo {
 public:
  template <class Compute>
  Algorithm1Result get(int cells, InferenceMode mode, Compute&& compute) {
    const auto key = std::make_tuple(cells, static_cast<int>(mode));
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }
    Algorithm1Result r = compute();
    std::lock_guard<std::mutex> lock(mutex_);
    return memo_.emplace(key, r).first->second;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int>, Algorithm1Result> memo_;
};

// Exhaustive lattice scan for r_in given a prepared lattice. Ties go to the
// smaller r_in.
inline Algorithm1Result algorithm1_scan(const Lattice1d& lat) {
  Algorithm1Result best{{0.0, lat.r_out()}, lat.privacy(0), 0};
  if (lat.none_covered()) return best;
  for (int j = 1; j <= lat.cells(); ++j) {
    const double p = lat.privacy(j);
    if (p > best.pi + 1e-12 * std::max(1.0, best.pi)) best = {{lat.r_value(j), lat.r_out()}, p, j};
  }
  return best;
}

// `memo` must only be shared between lattices built on the same prior.
inline Algorithm1Result algorithm1_optimize(const Lattice1d& lat, InferenceMode mode, FullCoverageMemo* memo) {
  if (memo && lat.fully_covered()) {
    Algorithm1Result r = memo->get(lat.cells(), mode, [&] { return algorithm1_scan(lat); });
    r.params.r_out = lat.r_out();
    return r;
  }
  return algorithm1_scan(lat);
}

inline Algorithm1Result algorithm1_optimize_r_in(const CacheState& cache, const UserProfile& profile, double epsilon,
                                                 InferenceMode mode, FullCoverageMemo* memo = nullptr) {
  return algorithm1_optimize(Lattice1d(cache, profile.flexibility, profile.prior, epsilon, mode), mode, memo);
}

}  // namespace locpriv
