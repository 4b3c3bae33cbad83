#pragma once

// The exact max-min defense on a grid, written as an LP:
//   maximize   sum_{x'} y_{x'}
//   subject to y_{x'} <= sum_x psi(x) f(x'|x) d(xhat, x)   for all x', xhat
//              sum_{x'} f(x'|x) = 1                        for every querying row x
//              f(x'|x) = 0     for uncovered x with d(x', x) > Q
//              f, y >= 0
// The zeroing equalities are part of the formulation but eliminated before
// the solve by never creating those columns.

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "locpriv/adversary.hpp"
#include "locpriv/core.hpp"
#include "locpriv/simplex.hpp"
#include "locpriv/strategy.hpp"

namespace locpriv {

// Maximum number of grid points accepted by the LP builder.
inline constexpr std::size_t kDefaultLpPointCap = 64;

struct MaxMinLp {
  LocationGrid grid;
  std::vector<double> prior;
  std::vector<bool> covered;
  std::vector<bool> querying;  // rows that issue a query
  std::vector<bool> allowed;   // n*n, f(x'|x) may be nonzero
  double flexibility = 0.0;
  bool hiding = false;
  double constant_term = 0.0;  // privacy of the no-query signal (hiding only)

  LinearProgram program;
  std::vector<long> f_column;          // n*n, column index or -1 when presolved away
  std::vector<std::size_t> y_column;   // n

  // Counts of the full formulation before presolve.
  std::size_t num_variables = 0;
  std::size_t num_inequalities = 0;
  std::size_t num_equalities = 0;
  std::size_t num_zeroing = 0;
};

struct LpSolution {
  QueryStrategy strategy;
  double value = 0.0;
  std::size_t iterations = 0;
  double duality_gap = 0.0;
  std::string status;
};

// min over grid guesses of sum_{x in set} psi(x) d(xhat, x).
inline double best_guess_error(const Prior& prior, const std::vector<bool>& set) {
  const std::size_t n = prior.grid().size();
  std::vector<double> w(n, 0.0);
  bool any = false;
  for (std::size_t x = 0; x < n; ++x) {
    if (set[x]) {
      w[x] = prior.mass(x);
      any = any || w[x] > 0.0;
    }
  }
  if (!any) return 0.0;
  return optimal_inference(prior.grid(), w).error;
}

inline double best_guess_error(const Prior& prior) {
  return best_guess_error(prior, std::vector<bool>(prior.grid().size(), true));
}

namespace detail {

inline MaxMinLp build_lp(const UserProfile& profile, const std::vector<bool>& covered, bool hiding,
                         std::size_t point_cap) {
  const Prior& prior = profile.prior;
  const LocationGrid& grid = prior.grid();
  const std::size_t n = grid.size();
  if (grid.resolution() < 2) throw std::invalid_argument("LP grid resolution must be at least 2");
  if (n > point_cap) {
    throw ConfigError("LP grid has " + std::to_string(n) + " points, above the cap of " + std::to_string(point_cap) +
                      " (constraint count grows with the square)");
  }
  if (covered.size() != n) throw std::invalid_argument("covered mask has wrong size");

  MaxMinLp lp{grid, std::vector<double>(prior.masses().begin(), prior.masses().end()), covered, {}, {}, profile.flexibility,
              hiding, 0.0, {}, {}, {}, 0, 0, 0, 0};
  lp.querying.assign(n, true);
  if (hiding) {
    for (std::size_t x = 0; x < n; ++x) lp.querying[x] = !covered[x];
    lp.constant_term = best_guess_error(prior, covered);
  }
  lp.allowed.assign(n * n, false);
  lp.f_column.assign(n * n, -1);
  lp.num_variables = n * n + n;
  lp.num_inequalities = n * n;
  lp.num_equalities = n;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t r = 0; r < n; ++r) {
      const bool ok = covered[x] || distance(grid.point(x), grid.point(r)) <= profile.flexibility + kCoverTol;
      if (!ok) ++lp.num_zeroing;
      lp.allowed[x * n + r] = ok && lp.querying[x];
    }
  }

  LinearProgram& p = lp.program;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t r = 0; r < n; ++r) {
      if (lp.allowed[x * n + r]) lp.f_column[x * n + r] = static_cast<long>(p.add_var(0.0));
    }
  }
  lp.y_column.resize(n);
  for (std::size_t r = 0; r < n; ++r) lp.y_column[r] = p.add_var(1.0);

  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t g = 0; g < n; ++g) {
      std::vector<std::pair<std::size_t, double>> terms{{lp.y_column[r], 1.0}};
      for (std::size_t x = 0; x < n; ++x) {
        const long col = lp.f_column[x * n + r];
        if (col < 0) continue;
        const double coef = lp.prior[x] * distance(grid.point(g), grid.point(x));
        if (coef != 0.0) terms.push_back({static_cast<std::size_t>(col), -coef});
      }
      p.add_row(std::move(terms), Sense::le, 0.0);
    }
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (!lp.querying[x]) continue;
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t r = 0; r < n; ++r) {
      const long col = lp.f_column[x * n + r];
      if (col >= 0) terms.push_back({static_cast<std::size_t>(col), 1.0});
    }
    p.add_row(std::move(terms), Sense::eq, 1.0);
  }
  return lp;
}

}  // namespace detail

inline MaxMinLp build_maxmin_lp(const UserProfile& profile, const CacheState& cache, const LocationGrid& grid,
                                std::size_t point_cap = kDefaultLpPointCap) {
  if (!(profile.prior.grid() == grid)) throw std::invalid_argument("profile prior lives on a different grid");
  return detail::build_lp(profile, covered_set(cache, profile.flexibility, grid), false, point_cap);
}

inline MaxMinLp build_hiding_lp(const UserProfile& profile, const CacheState& cache, const LocationGrid& grid,
                                std::size_t point_cap = kDefaultLpPointCap) {
  if (!(profile.prior.grid() == grid)) throw std::invalid_argument("profile prior lives on a different grid");
  return detail::build_lp(profile, covered_set(cache, profile.flexibility, grid), true, point_cap);
}

inline LpSolution solve_lp(const MaxMinLp& lp, const SimplexOptions& opt = {}) {
  const std::size_t n = lp.grid.size();
  LpResult res;
  bool any_query = false;
  for (bool q : lp.querying) any_query = any_query || q;
  if (any_query) res = solve_simplex(lp.program, opt);
  std::vector<double> m(n * n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    if (!lp.querying[x]) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const long col = lp.f_column[x * n + r];
      if (col >= 0) sum += m[x * n + r] = std::clamp(res.x[static_cast<std::size_t>(col)], 0.0, 1.0);
    }
    if (sum > 0.0) {
      for (std::size_t r = 0; r < n; ++r) m[x * n + r] /= sum;
    }
  }
  LpSolution sol{QueryStrategy(lp.grid, std::move(m), lp.covered, lp.hiding), res.value + lp.constant_term,
                 res.iterations, res.duality_gap, any_query ? res.status : "trivial"};
  return sol;
}

inline LpSolution solve_hiding_lp(const UserProfile& profile, const CacheState& cache, const LocationGrid& grid,
                                  std::size_t point_cap = kDefaultLpPointCap) {
  return solve_lp(build_hiding_lp(profile, cache, grid, point_cap));
}

// CPLEX LP text of the full formulation (zeroing equalities included).
// Columns: f_<x>_<r> for x, r in grid order (row-major in x), then y_<r>.
// Coefficients are printed with 12 fixed decimals.
inline std::string dump_lp(const MaxMinLp& lp) {
  const std::size_t n = lp.grid.size();
  std::ostringstream os;
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12f", v);
    return std::string(buf);
  };
  os << "\\ max-min location privacy LP, " << n << " grid points, Q = " << num(lp.flexibility) << "\n";
  os << "Maximize\n obj:";
  for (std::size_t r = 0; r < n; ++r) os << (r ? " + " : " ") << "y_" << r;
  os << "\nSubject To\n";
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t g = 0; g < n; ++g) {
      os << " m_" << r << "_" << g << ": y_" << r;
      for (std::size_t x = 0; x < n; ++x) {
        if (!lp.querying[x]) continue;
        const double coef = lp.prior[x] * distance(lp.grid.point(g), lp.grid.point(x));
        if (coef != 0.0) os << " - " << num(coef) << " f_" << x << "_" << r;
      }
      os << " <= 0\n";
    }
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (!lp.querying[x]) continue;
    os << " s_" << x << ":";
    for (std::size_t r = 0; r < n; ++r) os << (r ? " + " : " ") << "f_" << x << "_" << r;
    os << " = 1\n";
  }
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t r = 0; r < n; ++r) {
      if (lp.querying[x] && !lp.allowed[x * n + r]) os << " z_" << x << "_" << r << ": f_" << x << "_" << r << " = 0\n";
    }
  }
  os << "End\n";
  return os.str();
}

}  // namespace locpriv
