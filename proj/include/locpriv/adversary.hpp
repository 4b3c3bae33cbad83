#pragma once

// The attacker: Bayesian posteriors over grid strategies, the distance-
// minimizing point estimate, and candidate-set inference for the two- and
// four-point reflection schemes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locpriv/core.hpp"
#include "locpriv/error.hpp"
#include "locpriv/strategy.hpp"

namespace locpriv {

// weighted_mean: prior-weighted mean of the candidates.
// plain_mean: unweighted mean, whatever the prior.
// exact_bayes: minimizer of the posterior expected distance.
enum class InferenceMode { weighted_mean, plain_mean, exact_bayes };

inline std::string_view to_string(InferenceMode mode) noexcept {
  switch (mode) {
    case InferenceMode::weighted_mean: return "weighted-mean";
    case InferenceMode::plain_mean: return "plain-mean";
    case InferenceMode::exact_bayes: return "exact-bayes";
  }
  return "?";
}

inline std::optional<InferenceMode> parse_inference_mode(std::string_view s) noexcept {
  if (s == "weighted-mean") return InferenceMode::weighted_mean;
  if (s == "plain-mean") return InferenceMode::plain_mean;
  if (s == "exact-bayes") return InferenceMode::exact_bayes;
  return std::nullopt;
}

// --- grid posteriors ---------------------------------------------------------

struct Posterior {
  LocationGrid grid;
  std::vector<double> weight;
};

// weight(x) proportional to psi(x) f(x'|x).
inline Posterior posterior(const Prior& prior, const QueryStrategy& strategy, std::size_t observed) {
  if (!(prior.grid() == strategy.grid())) throw std::invalid_argument("prior and strategy grids differ");
  if (observed >= strategy.size()) throw std::invalid_argument("observed report is not a grid point");
  const std::size_t n = strategy.size();
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    w[x] = prior.mass(x) * strategy(x, observed);
    total += w[x];
  }
  if (!(total > 0.0)) {
    throw ImpossibleObservation("no location reports grid point " + std::to_string(observed) + " with positive probability");
  }
  for (double& v : w) v /= total;
  return {prior.grid(), std::move(w)};
}

// Posterior after a hiding user sends nothing: the prior restricted to the
// covered set.
inline Posterior hidden_posterior(const Prior& prior, const std::vector<bool>& covered) {
  const std::size_t n = prior.grid().size();
  std::vector<double> w(n, 0.0);
  double total = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (covered[x]) {
      w[x] = prior.mass(x);
      total += w[x];
    }
  }
  if (!(total > 0.0)) throw ImpossibleObservation("no-query signal with an empty covered set");
  for (double& v : w) v /= total;
  return {prior.grid(), std::move(w)};
}

struct Inference {
  std::size_t index;
  Point location;
  double error;
};

// argmin over grid points of sum_x weight(x) d(xhat, x). Weights need not be
// normalized; the error is reported in the same units. Ties go to the
// smaller coordinate (lexicographic in 2D).
inline Inference optimal_inference(const LocationGrid& grid, std::span<const double> weight) {
  const std::size_t n = grid.size();
  std::vector<std::size_t> support;
  for (std::size_t x = 0; x < n; ++x) {
    if (weight[x] > 0.0) support.push_back(x);
  }
  Inference best{0, grid.point(0), INFINITY};
  for (std::size_t c = 0; c < n; ++c) {
    const Point& p = grid.point(c);
    double e = 0.0;
    for (std::size_t x : support) e += weight[x] * distance(p, grid.point(x));
    if (c == 0) {
      best = {c, p, e};
      continue;
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(best.error));
    if (e < best.error - tol || (std::abs(e - best.error) <= tol && lex_less(p, best.location))) {
      best = {c, p, e};
    }
  }
  return best;
}

inline Inference optimal_inference(const Posterior& post) { return optimal_inference(post.grid, post.weight); }

// Brute-force expected privacy of a grid strategy against the optimal
// attacker: sum over reports of min over guesses of the joint-weighted
// distance. Hidden rows contribute the no-query inference term.
inline double expected_privacy(const Prior& prior, const QueryStrategy& strategy) {
  const std::size_t n = strategy.size();
  const LocationGrid& grid = strategy.grid();
  double total = 0.0;
  std::vector<double> joint(n);
  for (std::size_t r = 0; r < n; ++r) {
    bool any = false;
    for (std::size_t x = 0; x < n; ++x) {
      joint[x] = prior.mass(x) * strategy(x, r);
      any = any || joint[x] > 0.0;
    }
    if (any) total += optimal_inference(grid, joint).error;
  }
  if (strategy.hides_covered()) {
    bool any = false;
    for (std::size_t x = 0; x < n; ++x) {
      joint[x] = strategy.covered(x) ? prior.mass(x) : 0.0;
      any = any || joint[x] > 0.0;
    }
    if (any) total += optimal_inference(grid, joint).error;
  }
  return total;
}

// --- reflection inverses and candidate sets ------------------------------------

inline constexpr double kCandidateTol = 1e-9;

struct Preimage {
  double location;
  double likelihood;  // probability the reflection of `location` equals x'
};

struct Preimages {
  std::array<Preimage, 4> items{};
  int count = 0;

  const Preimage* begin() const noexcept { return items.data(); }
  const Preimage* end() const noexcept { return items.data() + count; }
};

// All x in [0,1] whose reflection by r can produce x', with the branch
// probability (1/2 per matching output). The piecewise-linear inverse gives
// at most four solutions; each is verified by forward evaluation.
inline Preimages invert_reflection(double xp, double r) noexcept {
  Preimages out;
  const double sol[4] = {r + xp, r - xp, 2.0 - r - xp, xp - r};
  for (double x : sol) {
    if (x < -kCandidateTol || x > 1.0 + kCandidateTol) continue;
    x = std::clamp(x, 0.0, 1.0);
    bool dup = false;
    for (int j = 0; j < out.count; ++j) dup = dup || std::abs(out.items[j].location - x) <= kCandidateTol;
    if (dup) continue;
    const Reflection f = reflect_query(x, r);
    double lik = 0.0;
    if (std::abs(f.left - xp) <= kCandidateTol) lik += 0.5;
    if (std::abs(f.right - xp) <= kCandidateTol) lik += 0.5;
    if (lik > 0.0) out.items[out.count++] = {x, lik};
  }
  std::sort(out.items.begin(), out.items.begin() + out.count,
            [](const Preimage& a, const Preimage& b) { return a.location < b.location; });
  return out;
}

struct Candidate {
  double location;
  double likelihood;
  bool covered;
};

using CandidateSet = std::vector<Candidate>;

// Continuum candidate set: covered preimages under r_in plus uncovered
// preimages under r_out. Without r_in (a hiding scheme) only the uncovered
// branch exists.
inline CandidateSet candidate_set(std::optional<double> r_in, double r_out, double xp, const CoveredIntervals& covered) {
  CandidateSet c;
  if (r_in) {
    for (const Preimage& p : invert_reflection(xp, *r_in)) {
      if (covered.contains(p.location)) c.push_back({p.location, p.likelihood, true});
    }
  }
  for (const Preimage& p : invert_reflection(xp, r_out)) {
    if (!covered.contains(p.location)) c.push_back({p.location, p.likelihood, false});
  }
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) { return a.location < b.location; });
  return c;
}

inline CandidateSet candidate_set(std::optional<double> r_in, double r_out, double xp, const CacheState& cache, double q) {
  return candidate_set(r_in, r_out, xp, CoveredIntervals(cache, q));
}

// Grid candidate set: as above, restricted to grid points.
inline CandidateSet candidate_set(std::optional<double> r_in, double r_out, double xp, const CacheState& cache, double q,
                                  const LocationGrid& grid) {
  if (grid.dimension() != 1) throw std::invalid_argument("two-point candidate sets need a 1D grid");
  CandidateSet c;
  for (const Candidate& cand : candidate_set(r_in, r_out, xp, cache, q)) {
    long k = grid.find({cand.location, 0.0});
    if (k < 0) continue;
    c.push_back({grid.point(static_cast<std::size_t>(k)).x, cand.likelihood, cand.covered});
  }
  return c;
}

namespace detail {

template <class Weight>
bool all_equal_weights(std::size_t n, Weight w) {
  for (std::size_t i = 1; i < n; ++i) {
    if (w(i) != w(0)) return false;
  }
  return true;
}

// Shared 1D inference kernel. `loc` must be sorted ascending; `psi` is the
// prior density at each candidate, `lik` the report likelihood.
inline double infer_1d(std::span<const double> loc, std::span<const double> psi, std::span<const double> lik,
                       InferenceMode mode) {
  const std::size_t n = loc.size();
  if (n == 0) throw ImpossibleObservation("observation inconsistent with the scheme");
  auto plain = [&] {
    double s = 0.0;
    for (double v : loc) s += v;
    return s / static_cast<double>(n);
  };
  switch (mode) {
    case InferenceMode::plain_mean: return plain();
    case InferenceMode::weighted_mean: {
      if (all_equal_weights(n, [&](std::size_t i) { return psi[i]; })) {
        if (!(psi[0] > 0.0)) throw ImpossibleObservation("candidate set has zero prior mass");
        return plain();
      }
      double s = 0.0, w = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += psi[i] * loc[i];
        w += psi[i];
      }
      return s / w;
    }
    case InferenceMode::exact_bayes: {
      // Lower weighted median: the smallest minimizer of expected distance.
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += psi[i] * lik[i];
      if (!(total > 0.0)) throw ImpossibleObservation("candidate set has zero posterior mass");
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += psi[i] * lik[i];
        if (acc >= 0.5 * total * (1.0 - 1e-12)) return loc[i];
      }
      return loc[n - 1];
    }
  }
  return plain();
}

}  // namespace detail

// Point estimate from a 1D candidate set. Prior weights are read from the
// prior's continuum density at each candidate.
inline double scheme_inference(const CandidateSet& cands, const Prior& prior, InferenceMode mode) {
  std::vector<double> loc(cands.size()), psi(cands.size()), lik(cands.size());
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cands[a].location < cands[b].location; });
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const Candidate& c = cands[order[i]];
    loc[i] = c.location;
    psi[i] = prior.density(c.location);
    lik[i] = c.likelihood;
  }
  return detail::infer_1d(loc, psi, lik, mode);
}

// Posterior expected distance between the candidates and a guess.
inline double candidate_error(const CandidateSet& cands, const Prior& prior, double guess) {
  double num = 0.0, den = 0.0;
  for (const auto& c : cands) {
    const double w = prior.density(c.location) * c.likelihood;
    num += w * std::abs(c.location - guess);
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

// --- four-point scheme (2D) ------------------------------------------------------

struct Candidate2 {
  Point location;
  double likelihood;
  bool covered;
};

using CandidateSet2 = std::vector<Candidate2>;

// Per-axis inverses combined as a product; each axis picks its branch
// independently, so likelihoods multiply.
inline CandidateSet2 candidate_set_2d(std::optional<double> r_in, double r_out, const Point& xp, const CoveredDiscs& covered) {
  CandidateSet2 c;
  auto add = [&](double r, bool want_covered) {
    const Preimages px = invert_reflection(xp.x, r);
    const Preimages py = invert_reflection(xp.y, r);
    for (const Preimage& a : px) {
      for (const Preimage& b : py) {
        const Point p{a.location, b.location};
        if (covered.contains(p) == want_covered) c.push_back({p, a.likelihood * b.likelihood, want_covered});
      }
    }
  };
  if (r_in) add(*r_in, true);
  add(r_out, false);
  return c;
}

namespace detail {

inline std::vector<double> distinct_axis_values(const CandidateSet2& cands, int axis) {
  std::vector<double> v;
  v.reserve(cands.size());
  for (const auto& c : cands) v.push_back(axis == 0 ? c.location.x : c.location.y);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) <= kCandidateTol; }), v.end());
  return v;
}

inline double axis_mean(const std::vector<double>& values, const Prior& prior, int axis, bool weighted) {
  double s = 0.0;
  for (double v : values) s += v;
  const double plain = s / static_cast<double>(values.size());
  if (!weighted) return plain;
  std::vector<double> w(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) w[i] = prior.marginal_density(axis, values[i]);
  if (all_equal_weights(w.size(), [&](std::size_t i) { return w[i]; })) {
    if (!(w[0] > 0.0)) throw ImpossibleObservation("candidate axis has zero marginal mass");
    return plain;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += w[i] * values[i];
    den += w[i];
  }
  return num / den;
}

inline double weighted_distance_sum(const CandidateSet2& cands, std::span<const double> w, const Point& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) s += w[i] * distance(cands[i].location, p);
  return s;
}

}  // namespace detail

inline Point scheme_inference_2d(const CandidateSet2& cands, const Prior& prior, InferenceMode mode) {
  if (cands.empty()) throw ImpossibleObservation("observation inconsistent with the scheme");
  const auto xs = detail::distinct_axis_values(cands, 0);
  const auto ys = detail::distinct_axis_values(cands, 1);
  const bool weighted = mode != InferenceMode::plain_mean;
  const Point mean{detail::axis_mean(xs, prior, 0, weighted), detail::axis_mean(ys, prior, 1, weighted)};
  if (mode != InferenceMode::exact_bayes) return mean;

  // Geometric median by Weiszfeld iteration, started at the mean estimate.
  // Candidate points are checked directly since the iteration stalls on them.
  std::vector<double> w(cands.size());
  double total = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    w[i] = prior.density(cands[i].location) * cands[i].likelihood;
    total += w[i];
  }
  if (!(total > 0.0)) throw ImpossibleObservation("candidate set has zero posterior mass");
  Point best = mean;
  double best_cost = detail::weighted_distance_sum(cands, w, best);
  for (const auto& c : cands) {
    const double cost = detail::weighted_distance_sum(cands, w, c.location);
    if (cost < best_cost - 1e-15) {
      best = c.location;
      best_cost = cost;
    }
  }
  Point p = mean;
  for (int it = 0; it < 200; ++it) {
    double sx = 0.0, sy = 0.0, sw = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double d = distance(cands[i].location, p);
      if (d < 1e-14 || w[i] == 0.0) continue;
      sx += w[i] * cands[i].location.x / d;
      sy += w[i] * cands[i].location.y / d;
      sw += w[i] / d;
    }
    if (!(sw > 0.0)) break;
    const Point next{sx / sw, sy / sw};
    const double cost = detail::weighted_distance_sum(cands, w, next);
    if (cost < best_cost - 1e-15) {
      best = next;
      best_cost = cost;
    }
    if (distance(next, p) < 1e-13) break;
    p = next;
  }
  return best;
}

}  // namespace locpriv
