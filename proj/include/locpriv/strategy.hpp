#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "locpriv/core.hpp"

namespace locpriv {

// Row-stochastic f(x'|x) over grid points. Row x is tagged covered or
// uncovered. A strategy built for the hiding baseline leaves covered rows
// all-zero: those users issue no query at all.
class QueryStrategy {
 public:
  QueryStrategy(LocationGrid grid, std::vector<double> matrix, std::vector<bool> covered, bool hides_covered = false)
      : grid_(std::move(grid)), matrix_(std::move(matrix)), covered_(std::move(covered)), hides_covered_(hides_covered) {
    const std::size_t n = grid_.size();
    if (matrix_.size() != n * n) throw std::invalid_argument("strategy matrix has wrong size");
    if (covered_.size() != n) throw std::invalid_argument("strategy partition mask has wrong size");
  }

  // Truthful reporting: f(x|x) = 1.
  static QueryStrategy identity(const LocationGrid& grid) {
    const std::size_t n = grid.size();
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 1.0;
    return QueryStrategy(grid, std::move(m), std::vector<bool>(n, false));
  }

  const LocationGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return grid_.size(); }
  double operator()(std::size_t x, std::size_t report) const noexcept { return matrix_[x * size() + report]; }
  std::span<const double> row(std::size_t x) const noexcept { return {matrix_.data() + x * size(), size()}; }
  std::span<const double> matrix() const noexcept { return matrix_; }
  bool covered(std::size_t x) const noexcept { return covered_[x]; }
  const std::vector<bool>& covered_mask() const noexcept { return covered_; }
  bool hides_covered() const noexcept { return hides_covered_; }
  bool hidden(std::size_t x) const noexcept { return hides_covered_ && covered_[x]; }

  // Checks the row-sum, range and service invariants; returns an empty string
  // when they hold, otherwise the first violation.
  std::string violation(double q, double tol = 1e-9) const {
    const std::size_t n = size();
    for (std::size_t x = 0; x < n; ++x) {
      double sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double v = (*this)(x, r);
        if (!(v >= -tol && v <= 1.0 + tol)) return "entry (" + std::to_string(x) + "," + std::to_string(r) + ") out of [0,1]";
        if (!covered_[x] && v > tol && distance(grid_.point(x), grid_.point(r)) > q + kCoverTol) {
          return "uncovered row " + std::to_string(x) + " reports beyond Q";
        }
        sum += v;
      }
      const double expected = hidden(x) ? 0.0 : 1.0;
      if (std::abs(sum - expected) > tol) return "row " + std::to_string(x) + " sums to " + std::to_string(sum);
    }
    return {};
  }

 private:
  LocationGrid grid_;
  std::vector<double> matrix_;
  std::vector<bool> covered_;
  bool hides_covered_;
};

}  // namespace locpriv
