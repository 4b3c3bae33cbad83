#pragma once

// Dense two-phase tableau simplex for small linear programs
// (maximize c'x subject to row constraints, x >= 0), with a dual
// certificate checked against the original data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "locpriv/error.hpp"

namespace locpriv {

enum class Sense { le, eq, ge };

struct LinearProgram {
  struct Row {
    std::vector<std::pair<std::size_t, double>> terms;
    Sense sense = Sense::le;
    double rhs = 0.0;
  };

  std::size_t num_vars = 0;
  std::vector<double> objective;  // maximized
  std::vector<Row> rows;

  std::size_t add_var(double cost) {
    objective.push_back(cost);
    return num_vars++;
  }
  void add_row(std::vector<std::pair<std::size_t, double>> terms, Sense sense, double rhs) {
    rows.push_back({std::move(terms), sense, rhs});
  }
};

struct SimplexOptions {
  double tol = 1e-9;
  double certificate_tol = 1e-7;
  std::size_t max_iterations = 0;  // 0: 100 * (rows + columns)
  int degenerate_streak_for_bland = 50;
};

struct LpResult {
  double value = 0.0;
  std::vector<double> x;
  std::vector<double> duals;  // one per row, sign convention of the original rows
  std::size_t iterations = 0;
  double duality_gap = 0.0;  // relative
  std::string status = "optimal";
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t m, std::size_t ncols) : m_(m), w_(ncols + 1), t_(m * (ncols + 1), 0.0), d_(ncols, 0.0), basis_(m) {}

  double& at(std::size_t i, std::size_t j) { return t_[i * w_ + j]; }
  double at(std::size_t i, std::size_t j) const { return t_[i * w_ + j]; }
  double& rhs(std::size_t i) { return t_[i * w_ + w_ - 1]; }
  double rhs(std::size_t i) const { return t_[i * w_ + w_ - 1]; }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return w_ - 1; }
  std::vector<double>& reduced() { return d_; }
  double& value() { return z_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    double* pr = &t_[r * w_];
    const double inv = 1.0 / pr[c];
    for (std::size_t j = 0; j < w_; ++j) pr[j] *= inv;
    pr[c] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* pi = &t_[i * w_];
      const double f = pi[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < w_; ++j) pi[j] -= f * pr[j];
      pi[c] = 0.0;
    }
    const double f = d_[c];
    if (f != 0.0) {
      for (std::size_t j = 0; j + 1 < w_; ++j) d_[j] -= f * pr[j];
      d_[c] = 0.0;
      z_ += f * pr[w_ - 1];
    }
    basis_[r] = c;
  }

  // Reduced costs and objective value for cost vector `c` under the current basis.
  void price(const std::vector<double>& c) {
    d_ = c;
    z_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      const double* pi = &t_[i * w_];
      for (std::size_t j = 0; j + 1 < w_; ++j) d_[j] -= cb * pi[j];
      z_ += cb * pi[w_ - 1];
    }
  }

 private:
  std::size_t m_, w_;
  std::vector<double> t_;
  std::vector<double> d_;
  double z_ = 0.0;
  std::vector<std::size_t> basis_;
};

// Runs simplex iterations on the current cost row. Columns with
// `barred[j]` never enter. Returns the number of pivots.
inline std::size_t iterate(Tableau& tab, const std::vector<bool>& barred, const SimplexOptions& opt, std::size_t budget) {
  std::size_t iters = 0;
  int degenerate = 0;
  auto& d = tab.reduced();
  const std::size_t m = tab.rows(), n = tab.cols();
  while (true) {
    const bool bland = degenerate >= opt.degenerate_streak_for_bland;
    std::size_t enter = n;
    double best = opt.tol;
    for (std::size_t j = 0; j < n; ++j) {
      if (barred[j] || d[j] <= opt.tol) continue;
      if (bland) {
        enter = j;
        break;
      }
      if (d[j] > best) {
        best = d[j];
        enter = j;
      }
    }
    if (enter == n) return iters;
    if (iters >= budget) throw SolverError("iteration limit reached after " + std::to_string(iters) + " pivots");

    std::size_t leave = m;
    double ratio = INFINITY;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = tab.at(i, enter);
      if (a <= opt.tol) continue;
      const double q = std::max(0.0, tab.rhs(i)) / a;
      if (leave == m || q < ratio - 1e-12 * std::max(1.0, ratio)) {
        leave = i;
        ratio = q;
      } else if (q <= ratio + 1e-12 * std::max(1.0, ratio)) {
        const bool take = bland ? tab.basis()[i] < tab.basis()[leave] : a > tab.at(leave, enter);
        if (take) {
          leave = i;
          ratio = std::min(ratio, q);
        }
      }
    }
    if (leave == m) throw SolverError("linear program is unbounded");
    degenerate = ratio <= 1e-14 ? degenerate + 1 : 0;
    tab.pivot(leave, enter);
    ++iters;
  }
}

}  // namespace detail

inline LpResult solve_simplex(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  const std::size_t n = lp.num_vars;
  const std::size_t m = lp.rows.size();
  if (lp.objective.size() != n) throw std::invalid_argument("objective length differs from variable count");

  // Normalize to nonnegative right-hand sides.
  std::vector<double> sign(m, 1.0);
  std::vector<Sense> sense(m);
  for (std::size_t i = 0; i < m; ++i) {
    sense[i] = lp.rows[i].sense;
    if (lp.rows[i].rhs < 0.0) {
      sign[i] = -1.0;
      if (sense[i] == Sense::le) sense[i] = Sense::ge;
      else if (sense[i] == Sense::ge) sense[i] = Sense::le;
    }
  }
  std::size_t n_slack = 0, n_art = 0;
  for (Sense s : sense) {
    if (s != Sense::eq) ++n_slack;
    if (s != Sense::le) ++n_art;
  }
  const std::size_t ncols = n + n_slack + n_art;
  detail::Tableau tab(m, ncols);
  std::vector<std::size_t> unit_col(m);  // column holding +e_i in the original system
  std::vector<bool> is_art(ncols, false);
  std::size_t next_slack = n, next_art = n + n_slack;
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& [j, a] : lp.rows[i].terms) {
      if (j >= n) throw std::invalid_argument("constraint references unknown variable");
      tab.at(i, j) += sign[i] * a;
    }
    tab.rhs(i) = sign[i] * lp.rows[i].rhs;
    if (sense[i] == Sense::le) {
      tab.at(i, next_slack) = 1.0;
      unit_col[i] = next_slack;
      tab.basis()[i] = next_slack++;
    } else {
      if (sense[i] == Sense::ge) tab.at(i, next_slack++) = -1.0;
      tab.at(i, next_art) = 1.0;
      is_art[next_art] = true;
      unit_col[i] = next_art;
      tab.basis()[i] = next_art++;
    }
  }
  const std::size_t budget = opt.max_iterations ? opt.max_iterations : 100 * (m + ncols);
  LpResult res;

  if (n_art > 0) {
    std::vector<double> c1(ncols, 0.0);
    for (std::size_t j = 0; j < ncols; ++j) {
      if (is_art[j]) c1[j] = -1.0;
    }
    tab.price(c1);
    res.iterations += detail::iterate(tab, std::vector<bool>(ncols, false), opt, budget);
    double scale = 1.0;
    for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(lp.rows[i].rhs));
    if (tab.value() < -1e-8 * scale) throw SolverError("linear program is infeasible");
    // Drive zero-level artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_art[tab.basis()[i]]) continue;
      for (std::size_t j = 0; j < ncols; ++j) {
        if (!is_art[j] && std::abs(tab.at(i, j)) > opt.tol) {
          tab.pivot(i, j);
          break;
        }
      }
    }
  }

  std::vector<double> c2(ncols, 0.0);
  std::copy(lp.objective.begin(), lp.objective.end(), c2.begin());
  tab.price(c2);
  res.iterations += detail::iterate(tab, is_art, opt, budget);

  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (tab.basis()[i] < n) res.x[tab.basis()[i]] = std::max(0.0, tab.rhs(i));
  }
  res.duals.resize(m);
  for (std::size_t i = 0; i < m; ++i) res.duals[i] = -tab.reduced()[unit_col[i]] * sign[i];

  // Certificate on the original data.
  double primal = 0.0;
  for (std::size_t j = 0; j < n; ++j) primal += lp.objective[j] * res.x[j];
  double dual = 0.0;
  std::vector<double> aty(n, 0.0);
  const double ctol = opt.certificate_tol;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = lp.rows[i];
    const double u = res.duals[i];
    double lhs = 0.0;
    for (const auto& [j, a] : row.terms) {
      lhs += a * res.x[j];
      aty[j] += a * u;
    }
    const double slack_tol = ctol * (1.0 + std::abs(row.rhs));
    const bool feasible = row.sense == Sense::le ? lhs <= row.rhs + slack_tol
                          : row.sense == Sense::ge ? lhs >= row.rhs - slack_tol
                                                   : std::abs(lhs - row.rhs) <= slack_tol;
    if (!feasible) throw SolverError("certificate: primal row " + std::to_string(i) + " violated");
    if ((row.sense == Sense::le && u < -ctol) || (row.sense == Sense::ge && u > ctol)) {
      throw SolverError("certificate: dual sign violated on row " + std::to_string(i));
    }
    dual += row.rhs * u;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (aty[j] < lp.objective[j] - ctol) throw SolverError("certificate: dual infeasible on column " + std::to_string(j));
  }
  res.value = primal;
  res.duality_gap = std::abs(primal - dual) / std::max(1.0, std::abs(primal));
  if (res.duality_gap > ctol) throw SolverError("certificate: duality gap " + std::to_string(res.duality_gap));
  return res;
}

}  // namespace locpriv
