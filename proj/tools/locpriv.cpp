// locpriv: experiment driver. One subcommand per experiment family; results
// go to CSV/JSON files under --out, a short JSON summary goes to stdout.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "locpriv/locpriv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace locpriv;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::string out = ".";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config file");
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--trials", c.trials, "Monte Carlo trials (overrides the config)")->check(CLI::PositiveNumber);
  app->add_option("--threads", c.threads, "worker threads; never changes results")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig ec = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) ec.scenario.seed = *c.seed;
  if (c.trials) ec.scenario.trials = *c.trials;
  if (c.threads) ec.scenario.threads = *c.threads;
  return ec;
}

fs::path out_file(const Common& c, const std::string& name) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create output directory " + c.out + ": " + ec.message());
  return fs::path(c.out) / name;
}

void write_json(const fs::path& path, const json& j) { detail::write_file(path, j.dump(2) + "\n"); }

// Cache points: "x1,x2,..." in 1D, "x1:y1,x2:y2,..." in 2D.
CacheState parse_cache(const std::string& s, int dimension) {
  CacheState cache;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    Point p;
    const auto colon = item.find(':');
    if (dimension == 1 && colon == std::string::npos) {
      if (!detail::parse_double(item, p.x)) throw ConfigError("bad cache point '" + item + "'");
    } else if (dimension == 2 && colon != std::string::npos) {
      if (!detail::parse_double(detail::trim(item.substr(0, colon)), p.x) ||
          !detail::parse_double(detail::trim(item.substr(colon + 1)), p.y)) {
        throw ConfigError("bad cache point '" + item + "'");
      }
    } else {
      throw ConfigError("cache point '" + item + "' does not match dimension " + std::to_string(dimension));
    }
    if (!in_unit_domain(p.x) || !in_unit_domain(p.y)) throw ConfigError("cache point '" + item + "' outside [0, 1]");
    cache.push(p);
  }
  return cache;
}

double pick_q(const std::optional<double>& q, const ScenarioConfig& c) {
  if (q) return *q;
  if (c.flexibility.is_fixed()) return c.flexibility.fixed.front();
  return std::clamp(c.flexibility.mu, 0.0, 0.5);
}

json result_json(const SimulationResult& r) {
  return {{"defense", std::string(to_string(r.defense))},
          {"N", r.users},
          {"trials", r.trials},
          {"seed", r.seed},
          {"estimator", std::string(to_string(r.estimator))},
          {"mean_pi", r.mean_total},
          {"ci_half", r.ci_total}};
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-user location privacy experiments"};
  app.require_subcommand(1);

  Common common;
  std::optional<double> q;
  std::string cache_text;
  bool hiding = false, dump = false, coverage = false;
  std::optional<double> epsilon;
  std::vector<std::string> defenses;

  auto* lp = app.add_subcommand("solve-lp", "exact max-min defense for one user");
  add_common(lp, common);
  lp->add_option("--q", q, "service flexibility Q");
  lp->add_option("--cache", cache_text, "cached query locations, comma separated (x:y in 2D)");
  lp->add_flag("--hiding", hiding, "covered users stay silent");
  lp->add_flag("--dump", dump, "also write the LP in CPLEX LP format");

  auto* ap = app.add_subcommand("approx-1d", "lattice search for r_in (1D)");
  add_common(ap, common);
  ap->add_option("--q", q, "service flexibility Q");
  ap->add_option("--cache", cache_text, "cached query locations, comma separated");
  ap->add_option("--epsilon", epsilon, "lattice step");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo over N sequential users (1D)");
  auto* sim2 = app.add_subcommand("simulate-2d", "Monte Carlo over N sequential users (2D)");
  for (auto* s : {sim, sim2}) {
    add_common(s, common);
    s->add_option("--defense", defenses, "defense(s) to run; default from the config");
    s->add_flag("--coverage", coverage, "also report the first-full-coverage statistics");
  }

  auto* seq = app.add_subcommand("sequence", "best query order for a fixed flexibility list");
  add_common(seq, common);

  auto* ts = app.add_subcommand("timeslot", "2D experiment per time slot");
  add_common(ts, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    ExperimentConfig ec = load(common);
    ScenarioConfig& cfg = ec.scenario;

    if (*lp) {
      const double qv = pick_q(q, cfg);
      const LocationGrid grid = cfg.grid();
      const CacheState cache = parse_cache(cache_text, cfg.dimension);
      const UserProfile profile(qv, cfg.prior());
      const MaxMinLp m = hiding ? build_hiding_lp(profile, cache, grid, cfg.lp_point_cap)
                                : build_maxmin_lp(profile, cache, grid, cfg.lp_point_cap);
      const LpSolution s = solve_lp(m);
      std::string csv = "x,report,f\n";
      const std::size_t n = grid.size();
      for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t r = 0; r < n; ++r) {
          const double f = s.strategy(x, r);
          if (f != 0.0) csv += std::to_string(x) + "," + std::to_string(r) + "," + detail::fmt9(f) + "\n";
        }
      }
      detail::write_file(out_file(common, "lp_strategy.csv"), csv);
      if (dump) detail::write_file(out_file(common, "lp.lp"), dump_lp(m));
      json j = {{"value", s.value},        {"status", s.status},
                {"iterations", s.iterations}, {"duality_gap", s.duality_gap},
                {"variables", m.num_variables}, {"inequalities", m.num_inequalities},
                {"equalities", m.num_equalities}, {"zeroing", m.num_zeroing}};
      write_json(out_file(common, "lp.json"), j);
      std::cout << j.dump() << "\n";
    } else if (*ap) {
      if (cfg.dimension != 1) throw ConfigError("approx-1d needs dimension = 1");
      if (epsilon) cfg.epsilon = *epsilon;
      cfg.validate();
      const double qv = pick_q(q, cfg);
      const CacheState cache = parse_cache(cache_text, 1);
      const Prior prior = cfg.prior();
      const Lattice1d lat(cache, qv, prior, cfg.epsilon, cfg.inference);
      const Algorithm1Result best = algorithm1_scan(lat);
      std::string csv = "r_in,pi\n";
      for (int j = 0; j <= lat.cells(); ++j) csv += detail::fmt9(lat.r_value(j)) + "," + detail::fmt9(lat.privacy(j)) + "\n";
      detail::write_file(out_file(common, "approx_1d.csv"), csv);
      json j = {{"r_in", best.params.r_in},
                {"r_out", best.params.r_out},
                {"pi", best.pi},
                {"hiding_pi", lat.hiding_privacy()},
                {"inference", std::string(to_string(cfg.inference))}};
      write_json(out_file(common, "approx_1d.json"), j);
      std::cout << j.dump() << "\n";
    } else if (*sim || *sim2) {
      if (*sim2) cfg.dimension = 2;
      std::vector<Defense> ds;
      for (const auto& d : defenses) {
        const auto p = parse_defense(d);
        if (!p) throw ConfigError("unknown defense '" + d + "'");
        ds.push_back(*p);
      }
      if (ds.empty()) ds.push_back(cfg.defense);
      std::vector<SimulationResult> results;
      json summary = json::array();
      for (Defense d : ds) {
        ScenarioConfig c = cfg;
        c.defense = d;
        c.validate();
        results.push_back(run_experiment(c));
        summary.push_back(result_json(results.back()));
      }
      const std::string name = *sim2 ? "results_2d" : "results";
      emit_results(results, out_file(common, name + ".csv"));
      json j = {{"results", summary}};
      if (coverage) {
        if (cfg.dimension != 1) throw ConfigError("coverage statistics are 1D only");
        const CoverageStats cs = coverage_stats(cfg);
        j["coverage"] = {{"median", cs.median},
                         {"q1", cs.q1},
                         {"q3", cs.q3},
                         {"cutoff", cs.cutoff},
                         {"overflow_fraction", cs.overflow_fraction}};
      }
      write_json(out_file(common, name + ".json"), j);
      std::cout << j.dump() << "\n";
    } else if (*seq) {
      if (!cfg.flexibility.is_fixed()) throw ConfigError("sequence needs [flexibility] values");
      cfg.validate();
      const OrderingResult r = best_order(cfg.flexibility.fixed, cfg);
      detail::write_file(out_file(common, "sequence.csv"), format_ordering(r));
      json j = {{"best", format_order(r.best)},
                {"total_pi", r.total},
                {"ci_half", r.ci_half},
                {"flexibilities", cfg.flexibility.fixed},
                {"trials", cfg.trials},
                {"seed", cfg.seed}};
      write_json(out_file(common, "sequence.json"), j);
      std::cout << j.dump() << "\n";
    } else if (*ts) {
      if (ec.timeslots.empty()) throw ConfigError("timeslot needs [timeslot] series");
      const fs::path base = common.config.empty() ? fs::path{} : fs::path(common.config).parent_path();
      const fs::path series = fs::path(ec.timeslots).is_relative() ? base / ec.timeslots : fs::path(ec.timeslots);
      const TimeSlotSeries slots = load_timeslots(series);
      DensityMap density{cfg.resolution, cfg.density};
      if (cfg.dimension != 2 || density.weights.empty()) {
        // Uniform map at the configured resolution.
        density.weights.assign(static_cast<std::size_t>(cfg.resolution) * cfg.resolution,
                               1.0 / (static_cast<double>(cfg.resolution) * cfg.resolution));
      }
      std::vector<Defense> ds;
      for (const auto& d : ec.defenses) ds.push_back(*parse_defense(d));
      if (ds.empty()) ds.push_back(cfg.defense);
      cfg.dimension = 2;
      const auto rows = run_timeslot_study(density, slots, cfg, ds);
      detail::write_file(out_file(common, "timeslot.csv"), format_timeslot_table(rows));
      json j = json::array();
      for (const auto& r : rows) {
        j.push_back({{"slot", r.label}, {"N", r.users}, {"defense", std::string(to_string(r.defense))},
                     {"mean_pi", r.result.mean_total}, {"ci_half", r.result.ci_total}});
      }
      std::cout << j.dump() << "\n";
    }
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::invalid_argument& e) {
    return fail("invalid-argument", e.what());
  } catch (const std::domain_error& e) {
    return fail("domain", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
