#pragma once

// Exhaustive search for the query order that maximizes total expected
// privacy. All permutations are scored on the same trial draws: streams are
// keyed by query position, so only the flexibilities move.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "locpriv/simulator.hpp"

namespace locpriv {

inline constexpr std::size_t kMaxExhaustiveUsers = 8;

struct OrderScore {
  std::vector<int> order;  // user indices, query position first
  double total = 0.0;      // Pi = sum of per-position privacy
  double ci_half = 0.0;
  std::vector<double> per_trial;
};

struct OrderingResult {
  std::vector<int> best;
  double total = 0.0;
  double ci_half = 0.0;
  std::vector<OrderScore> table;  // every permutation, lexicographic order
};

// Pi for one order. `config.users` and the flexibility spec are replaced by
// the permuted list.
inline OrderScore total_privacy(const std::vector<int>& order, const std::vector<double>& flexibilities,
                                const ScenarioConfig& config) {
  if (order.size() != flexibilities.size()) throw std::invalid_argument("order length differs from the user count");
  std::vector<bool> seen(order.size(), false);
  for (int i : order) {
    if (i < 0 || static_cast<std::size_t>(i) >= order.size() || seen[static_cast<std::size_t>(i)]) {
      throw std::invalid_argument("order is not a permutation");
    }
    seen[static_cast<std::size_t>(i)] = true;
  }
  ScenarioConfig cfg = config;
  cfg.users = static_cast<int>(order.size());
  cfg.flexibility.fixed.clear();
  for (int i : order) cfg.flexibility.fixed.push_back(flexibilities[static_cast<std::size_t>(i)]);
  const SimulationResult r = run_experiment(cfg);
  OrderScore s;
  s.order = order;
  s.per_trial.assign(static_cast<std::size_t>(r.trials), 0.0);
  for (int k = 0; k < r.trials; ++k) {
    for (int i = 0; i < r.users; ++i) s.per_trial[static_cast<std::size_t>(k)] += r.value(k, i);
  }
  const MeanCi m = mean_ci(s.per_trial);
  s.total = m.mean;
  s.ci_half = m.half;
  return s;
}

inline OrderingResult best_order(const std::vector<double>& flexibilities, const ScenarioConfig& config) {
  const std::size_t n = flexibilities.size();
  if (n == 0) throw std::invalid_argument("no users to order");
  if (n > kMaxExhaustiveUsers) {
    throw ConfigError("too many users for exhaustive search (" + std::to_string(n) + " > " +
                      std::to_string(kMaxExhaustiveUsers) + "); fix a heuristic order and use total_privacy");
  }
  std::vector<std::vector<int>> perms;
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));

  // Each permutation runs its own trials serially; permutations run in parallel.
  ScenarioConfig inner = config;
  inner.threads = 1;
  OrderingResult res;
  res.table.resize(perms.size());
  parallel_for(static_cast<int>(perms.size()), config.threads,
               [&](int i) { res.table[static_cast<std::size_t>(i)] = total_privacy(perms[static_cast<std::size_t>(i)], flexibilities, inner); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < res.table.size(); ++i) {
    if (res.table[i].total > res.table[best].total) best = i;
  }
  res.best = res.table[best].order;
  res.total = res.table[best].total;
  res.ci_half = res.table[best].ci_half;
  return res;
}

}  // namespace locpriv
