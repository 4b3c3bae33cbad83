#pragma once

// The sequential crowdsourced protocol run end to end: users arrive in
// order, consult the shared cache, pick a strategy for their defense, report,
// and are attacked. Monte Carlo over trials with position-keyed random
// streams, so every defense and every ordering sees the same draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "locpriv/adversary.hpp"
#include "locpriv/approx.hpp"
#include "locpriv/approx2d.hpp"
#include "locpriv/core.hpp"
#include "locpriv/lp_game.hpp"
#include "locpriv/rng.hpp"

namespace locpriv {

enum class Defense { lp_exact, approx, hide_approx, hide_lp };

inline std::string_view to_string(Defense d) noexcept {
  switch (d) {
    case Defense::lp_exact: return "lp-exact";
    case Defense::approx: return "approx";
    case Defense::hide_approx: return "hide-approx";
    case Defense::hide_lp: return "hide-lp";
  }
  return "?";
}

inline std::optional<Defense> parse_defense(std::string_view s) noexcept {
  if (s == "lp-exact") return Defense::lp_exact;
  if (s == "approx") return Defense::approx;
  if (s == "hide-approx") return Defense::hide_approx;
  if (s == "hide-lp") return Defense::hide_lp;
  return std::nullopt;
}

// realized: distance between the true location and the attacker's guess.
// conditional: the scheme's expected privacy given the cache and Q, which is
// the realized value averaged over the user's own location and report.
enum class Estimator { realized, conditional };

inline std::string_view to_string(Estimator e) noexcept { return e == Estimator::realized ? "realized" : "conditional"; }

inline std::optional<Estimator> parse_estimator(std::string_view s) noexcept {
  if (s == "realized") return Estimator::realized;
  if (s == "conditional") return Estimator::conditional;
  return std::nullopt;
}

struct FlexibilitySpec {
  std::vector<double> fixed;  // one per user order; empty means truncated normal
  double mu = 0.1;
  double sigma = 0.1;

  bool is_fixed() const noexcept { return !fixed.empty(); }
};

struct ScenarioConfig {
  int dimension = 1;
  int resolution = 20;
  int users = 1;
  FlexibilitySpec flexibility;
  std::vector<double> density;  // prior weights per grid cell; empty means uniform
  std::string density_source = "uniform";
  Defense defense = Defense::approx;
  InferenceMode inference = InferenceMode::weighted_mean;
  Estimator estimator = Estimator::realized;
  int trials = 1000;
  std::uint64_t seed = 0;
  double epsilon = 1e-2;
  int threads = 1;
  std::size_t lp_point_cap = kDefaultLpPointCap;
  int coverage_cutoff = 10000;

  LocationGrid grid() const { return LocationGrid(dimension, resolution); }
  Prior prior() const {
    const LocationGrid g = grid();
    return density.empty() ? Prior::uniform(g) : Prior::from_weights(g, density);
  }

  // Throws ConfigError on the first violated invariant.
  void validate() const {
    if (dimension != 1 && dimension != 2) throw ConfigError("dimension must be 1 or 2");
    if (resolution < 2) throw ConfigError("grid resolution M must be at least 2");
    if (users < 1) throw ConfigError("user count N must be at least 1");
    if (trials < 1) throw ConfigError("trial count T must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (!(epsilon > 0.0 && epsilon <= 0.1)) throw ConfigError("epsilon must lie in (0, 0.1]");
    if (coverage_cutoff < 1) throw ConfigError("coverage cutoff must be positive");
    if (flexibility.is_fixed()) {
      if (flexibility.fixed.size() != static_cast<std::size_t>(users)) {
        throw ConfigError("flexibility list has " + std::to_string(flexibility.fixed.size()) + " entries but N = " +
                          std::to_string(users));
      }
      for (double q : flexibility.fixed) {
        if (!(q >= 0.0 && q <= 0.5)) throw ConfigError("fixed flexibility " + std::to_string(q) + " outside [0, 0.5]");
      }
    } else {
      if (!(flexibility.mu >= -1.0 && flexibility.mu <= 1.0)) throw ConfigError("flexibility mean must lie in [-1, 1]");
      if (!(flexibility.sigma > 0.0)) throw ConfigError("flexibility sigma must be positive");
    }
    const std::size_t points = grid().size();
    if ((defense == Defense::lp_exact || defense == Defense::hide_lp) && points > lp_point_cap) {
      throw ConfigError("defense " + std::string(to_string(defense)) + " with M = " + std::to_string(resolution) + " needs " +
                        std::to_string(points) + " grid points, above the LP cap of " + std::to_string(lp_point_cap));
    }
    if (!density.empty() && density.size() != points) {
      throw ConfigError("density map has " + std::to_string(density.size()) + " cells, grid has " + std::to_string(points));
    }
  }
};

struct UserOutcome {
  double flexibility = 0.0;
  Point location;
  std::optional<Point> report;  // absent when the user stayed silent
  Point guess;
  double realized = 0.0;
  double conditional = 0.0;
  bool covered = false;
  bool full_coverage = false;  // the user's covered set was the whole grid

  double value(Estimator e) const noexcept { return e == Estimator::realized ? realized : conditional; }
};

// Shared, thread-safe state for one experiment: the prior and memo tables
// that never change results, only speed.
class SimulationContext {
 public:
  explicit SimulationContext(const ScenarioConfig& config) : config_(config), prior_(config.prior()), grid_(config.grid()) {
    config_.validate();
  }

  const ScenarioConfig& config() const noexcept { return config_; }
  const Prior& prior() const noexcept { return prior_; }
  const LocationGrid& grid() const noexcept { return grid_; }
  FullCoverageMemo& memo() const noexcept { return memo_; }

  // LP solutions depend on the cache only through the covered mask and on Q
  // only through which grid offsets are within reach.
  const LpSolution& lp(const std::vector<bool>& covered, double q, bool hiding) const {
    const double reach = q * grid_.resolution();
    const long offsets = static_cast<long>(std::floor(reach * reach + 1e-9));
    std::string key(covered.size() + 1, '0');
    for (std::size_t i = 0; i < covered.size(); ++i) key[i] = covered[i] ? '1' : '0';
    key.back() = hiding ? 'h' : 'q';
    key += std::to_string(offsets);
    {
      std::lock_guard<std::mutex> lock(lp_mutex_);
      auto it = lp_memo_.find(key);
      if (it != lp_memo_.end()) return *it->second;
    }
    const UserProfile profile(q, prior_);
    auto lp = detail::build_lp(profile, covered, hiding, config_.lp_point_cap);
    auto sol = std::make_unique<LpSolution>(solve_lp(lp));
    std::lock_guard<std::mutex> lock(lp_mutex_);
    auto [it, inserted] = lp_memo_.emplace(key, std::move(sol));
    return *it->second;
  }

 private:
  ScenarioConfig config_;
  Prior prior_;
  LocationGrid grid_;
  mutable FullCoverageMemo memo_;
  mutable std::mutex lp_mutex_;
  mutable std::map<std::string, std::unique_ptr<LpSolution>> lp_memo_;
};

namespace detail {

inline double draw_flexibility(const ScenarioConfig& cfg, std::uint64_t trial, std::size_t slot) {
  if (cfg.flexibility.is_fixed()) return cfg.flexibility.fixed.at(slot);
  Engine e = make_engine(cfg.seed, trial, slot, Stream::flexibility);
  return sample_flexibility(cfg.flexibility.mu, cfg.flexibility.sigma, e);
}

inline std::size_t sample_row(std::span<const double> row, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] <= 0.0) continue;
    last = i;
    acc += row[i];
    if (u < acc) return i;
  }
  return last;
}

inline bool grid_fully_covered(const CacheState& cache, double q, const LocationGrid& grid) {
  if (cache.empty()) return false;
  const auto mask = covered_set(cache, q, grid);
  return std::all_of(mask.begin(), mask.end(), [](bool b) { return b; });
}

// One user of the continuum 1D schemes.
inline UserOutcome step_approx_1d(const SimulationContext& ctx, CacheState& cache, double q, double ux, double ub,
                                  bool hiding) {
  const ScenarioConfig& cfg = ctx.config();
  const Prior& prior = ctx.prior();
  UserOutcome out;
  out.flexibility = q;
  out.location = {prior.sample_1d(ux), 0.0};
  out.full_coverage = grid_fully_covered(cache, q, ctx.grid());
  const double x = out.location.x;
  const double r_out = std::min(q, 0.5);
  const Lattice1d lat(cache, q, prior, cfg.epsilon, cfg.inference);
  const CoveredIntervals& cov = lat.covered();
  out.covered = !cache.empty() && cov.contains(x);

  if (hiding) {
    out.conditional = lat.hiding_privacy();
    if (out.covered) {
      out.guess = {silent_inference(cov, prior, cfg.inference).guess, 0.0};
    } else {
      const Reflection f = reflect_query(x, r_out);
      const double xp = ub < 0.5 ? f.left : f.right;
      out.report = Point{xp, 0.0};
      out.guess = {scheme_inference(candidate_set(std::nullopt, r_out, xp, cov), prior, cfg.inference), 0.0};
    }
  } else {
    std::optional<double> r_in;
    if (cache.empty()) {
      out.conditional = lat.privacy(0);
    } else {
      const Algorithm1Result a = algorithm1_optimize(lat, cfg.inference, &ctx.memo());
      r_in = a.params.r_in;
      out.conditional = a.pi;
    }
    const double r = out.covered ? *r_in : r_out;
    const Reflection f = reflect_query(x, r);
    const double xp = ub < 0.5 ? f.left : f.right;
    out.report = Point{xp, 0.0};
    out.guess = {scheme_inference(candidate_set(r_in, r_out, xp, cov), prior, cfg.inference), 0.0};
  }
  out.realized = distance(out.location, out.guess);
  if (out.report) cache.push(*out.report);
  return out;
}

// One user of the continuum 2D schemes.
inline UserOutcome step_approx_2d(const SimulationContext& ctx, CacheState& cache, double q, const double (&u)[5],
                                  bool hiding) {
  const ScenarioConfig& cfg = ctx.config();
  const Prior& prior = ctx.prior();
  UserOutcome out;
  out.flexibility = q;
  out.location = prior.sample_2d(u[0], u[1], u[2]);
  out.full_coverage = grid_fully_covered(cache, q, ctx.grid());
  const double r_out = std::min(q, 0.5);
  const CoveredDiscs cov(cache, q);
  out.covered = cov.contains(out.location);
  const bool rx = u[3] >= 0.5, ry = u[4] >= 0.5;

  if (hiding) {
    const Lattice2d lat(cache, q, prior, cfg.epsilon, cfg.inference);
    const SilentInference2 silent = silent_inference_2d(cache, q, prior, lat.cells(), cfg.inference);
    const auto s = lat.sums(std::nullopt);
    out.conditional = (1.0 - silent.mass) * (s.den > 0.0 ? s.num / s.den : 0.0) + silent.num;
    if (out.covered) {
      out.guess = silent.guess;
    } else {
      const Point xp = reflect_point(out.location, r_out, rx, ry);
      out.report = xp;
      out.guess = scheme_inference_2d(candidate_set_2d(std::nullopt, r_out, xp, cov), prior, cfg.inference);
    }
  } else {
    std::optional<double> r_in;
    if (cache.empty()) {
      out.conditional = Lattice2d(cache, q, prior, cfg.epsilon, cfg.inference).privacy(0);
    } else {
      const Algorithm1Result a =
          algorithm2_optimize_r_in_2d(cache, UserProfile(q, prior), cfg.epsilon, cfg.inference, &ctx.memo());
      r_in = a.params.r_in;
      out.conditional = a.pi;
    }
    const Point xp = reflect_point(out.location, out.covered ? *r_in : r_out, rx, ry);
    out.report = xp;
    out.guess = scheme_inference_2d(candidate_set_2d(r_in, r_out, xp, cov), prior, cfg.inference);
  }
  out.realized = distance(out.location, out.guess);
  if (out.report) cache.push(*out.report);
  return out;
}

// One user of the grid LP defenses.
inline UserOutcome step_lp(const SimulationContext& ctx, CacheState& cache, double q, double ux, double ub, bool hiding) {
  const Prior& prior = ctx.prior();
  const LocationGrid& grid = ctx.grid();
  UserOutcome out;
  out.flexibility = q;
  const std::size_t x = prior.pick_cell(ux);
  out.location = grid.point(x);
  const auto covered = covered_set(cache, q, grid);
  out.full_coverage = !cache.empty() && std::all_of(covered.begin(), covered.end(), [](bool b) { return b; });
  out.covered = covered[x];
  const LpSolution& sol = ctx.lp(covered, q, hiding);
  out.conditional = sol.value;
  if (hiding && out.covered) {
    out.guess = optimal_inference(hidden_posterior(prior, covered)).location;
  } else {
    const std::size_t r = sample_row(sol.strategy.row(x), ub);
    out.report = grid.point(r);
    out.guess = optimal_inference(posterior(prior, sol.strategy, r)).location;
  }
  out.realized = distance(out.location, out.guess);
  if (out.report) cache.push(*out.report);
  return out;
}

}  // namespace detail

// Runs one trial of `users` users. Random draws depend only on
// (seed, trial, query position, stream).
inline std::vector<UserOutcome> run_trial(const SimulationContext& ctx, std::uint64_t trial, int users = -1) {
  const ScenarioConfig& cfg = ctx.config();
  const int n = users < 0 ? cfg.users : users;
  CacheState cache;
  std::vector<UserOutcome> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto slot = static_cast<std::size_t>(i);
    const double q = detail::draw_flexibility(cfg, trial, slot);
    Engine loc = make_engine(cfg.seed, trial, slot, Stream::location);
    Engine rep = make_engine(cfg.seed, trial, slot, Stream::report);
    switch (cfg.defense) {
      case Defense::approx:
      case Defense::hide_approx: {
        const bool hiding = cfg.defense == Defense::hide_approx;
        if (cfg.dimension == 1) {
          const double ux = uniform01(loc);
          out.push_back(detail::step_approx_1d(ctx, cache, q, ux, uniform01(rep), hiding));
        } else {
          double u[5];
          u[0] = uniform01(loc);
          u[1] = uniform01(loc);
          u[2] = uniform01(loc);
          u[3] = uniform01(rep);
          u[4] = uniform01(rep);
          out.push_back(detail::step_approx_2d(ctx, cache, q, u, hiding));
        }
        break;
      }
      case Defense::lp_exact:
      case Defense::hide_lp: {
        const double ux = uniform01(loc);
        out.push_back(detail::step_lp(ctx, cache, q, ux, uniform01(rep), cfg.defense == Defense::hide_lp));
        break;
      }
    }
  }
  return out;
}

struct SimulationResult {
  Defense defense = Defense::approx;
  int users = 0;
  int trials = 0;
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::realized;
  std::vector<double> mean_pi;  // per user order
  std::vector<double> ci_half;  // 95% normal-approximation half-widths
  double mean_total = 0.0;      // average over users of mean_pi
  double ci_total = 0.0;
  // Trial-major values for paired comparisons: per_trial[t * users + i].
  std::vector<double> per_trial;
  // First (trial, order) whose user saw a fully covered grid, 1-based order.
  std::optional<std::pair<int, int>> first_full_coverage;

  double value(int trial, int order) const { return per_trial[static_cast<std::size_t>(trial) * users + order]; }
};

struct MeanCi {
  double mean = 0.0;
  double half = 0.0;
};

inline MeanCi mean_ci(std::span<const double> v) {
  MeanCi r;
  if (v.empty()) return r;
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.half = 1.96 * std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return r;
}

// Runs `count` jobs on up to `threads` threads, job i writing only slot i.
template <class Job>
void parallel_for(int count, int threads, Job&& job) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += threads) job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline SimulationResult run_experiment(const SimulationContext& ctx) {
  const ScenarioConfig& cfg = ctx.config();
  const int n = cfg.users, t = cfg.trials;
  std::vector<std::vector<UserOutcome>> trials(static_cast<std::size_t>(t));
  parallel_for(t, cfg.threads, [&](int k) { trials[static_cast<std::size_t>(k)] = run_trial(ctx, static_cast<std::uint64_t>(k)); });

  SimulationResult res;
  res.defense = cfg.defense;
  res.users = n;
  res.trials = t;
  res.seed = cfg.seed;
  res.estimator = cfg.estimator;
  res.per_trial.resize(static_cast<std::size_t>(n) * t);
  for (int k = 0; k < t; ++k) {
    for (int i = 0; i < n; ++i) {
      const UserOutcome& o = trials[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      res.per_trial[static_cast<std::size_t>(k) * n + i] = o.value(cfg.estimator);
      if (!res.first_full_coverage && o.full_coverage) res.first_full_coverage = {k, i + 1};
    }
  }
  std::vector<double> col(static_cast<std::size_t>(t)), avg(static_cast<std::size_t>(t), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < t; ++k) {
      col[static_cast<std::size_t>(k)] = res.value(k, i);
      avg[static_cast<std::size_t>(k)] += res.value(k, i) / n;
    }
    const MeanCi m = mean_ci(col);
    res.mean_pi.push_back(m.mean);
    res.ci_half.push_back(m.half);
  }
  const MeanCi m = mean_ci(avg);
  res.mean_total = m.mean;
  res.ci_total = m.half;
  return res;
}

inline SimulationResult run_experiment(const ScenarioConfig& config) { return run_experiment(SimulationContext(config)); }

// Mean over users 1..n of each trial's values, i.e. the N = n experiment
// (later users never influence earlier ones).
inline std::vector<double> prefix_average(const SimulationResult& r, int n) {
  std::vector<double> v(static_cast<std::size_t>(r.trials), 0.0);
  for (int k = 0; k < r.trials; ++k) {
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(k)] += r.value(k, i) / n;
  }
  return v;
}

// --- coverage ------------------------------------------------------------------

struct CoverageStats {
  std::vector<int> n_prime;  // per trial; cutoff value when not reached
  int cutoff = 0;
  double overflow_fraction = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

inline double quantile_sorted(const std::vector<int>& s, double p) {
  if (s.empty()) return 0.0;
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

// N' per trial: the number of cached queries when the arriving user's covered
// set first equals the whole grid. Users follow the approx defense in 1D.
inline CoverageStats coverage_stats(const ScenarioConfig& config) {
  if (config.dimension != 1) throw ConfigError("coverage statistics are defined for the 1D approx defense");
  ScenarioConfig cfg = config;
  cfg.defense = Defense::approx;
  cfg.users = 1;
  if (cfg.flexibility.is_fixed()) cfg.flexibility.fixed.resize(1, cfg.flexibility.fixed.empty() ? 0.0 : cfg.flexibility.fixed[0]);
  const SimulationContext ctx(cfg);
  auto q_at = [&](std::uint64_t trial, std::size_t slot) {
    if (config.flexibility.is_fixed()) {
      const auto& f = config.flexibility.fixed;
      return f[std::min(slot, f.size() - 1)];
    }
    Engine e = make_engine(cfg.seed, trial, slot, Stream::flexibility);
    return sample_flexibility(cfg.flexibility.mu, cfg.flexibility.sigma, e);
  };
  CoverageStats st;
  st.cutoff = cfg.coverage_cutoff;
  st.n_prime.assign(static_cast<std::size_t>(cfg.trials), cfg.coverage_cutoff);
  parallel_for(cfg.trials, cfg.threads, [&](int k) {
    CacheState cache;
    const auto trial = static_cast<std::uint64_t>(k);
    for (int i = 0; i < cfg.coverage_cutoff; ++i) {
      const auto slot = static_cast<std::size_t>(i);
      const double q = q_at(trial, slot);
      if (detail::grid_fully_covered(cache, q, ctx.grid())) {
        st.n_prime[static_cast<std::size_t>(k)] = i;
        return;
      }
      Engine loc = make_engine(cfg.seed, trial, slot, Stream::location);
      Engine rep = make_engine(cfg.seed, trial, slot, Stream::report);
      const double ux = uniform01(loc);
      detail::step_approx_1d(ctx, cache, q, ux, uniform01(rep), false);
    }
  });
  std::vector<int> s = st.n_prime;
  std::sort(s.begin(), s.end());
  st.overflow_fraction =
      static_cast<double>(std::count(s.begin(), s.end(), cfg.coverage_cutoff)) / static_cast<double>(s.size());
  st.median = quantile_sorted(s, 0.5);
  st.q1 = quantile_sorted(s, 0.25);
  st.q3 = quantile_sorted(s, 0.75);
  return st;
}

}  // namespace locpriv
