#pragma once

// Scenario ingestion and result emission: density maps, time-slot series,
// the INI-style experiment config, and CSV output.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "locpriv/error.hpp"
#include "locpriv/sequencer.hpp"
#include "locpriv/simulator.hpp"

namespace locpriv {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

inline bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

inline bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-') return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoull(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("error writing " + path.string());
}

// 9 significant digits, the fixed float format of every CSV.
inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Shortest form that reads back to the same double.
inline std::string fmt_exact(double v) {
  char buf[40];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

// --- density maps ------------------------------------------------------------------

// M x M nonnegative weights, row-major: row k of the file holds the cells
// with y index k, column j the cells with x index j. Normalized on load.
struct DensityMap {
  int resolution = 0;
  std::vector<double> weights;

  // A no-op on maps that already sum to 1 within 1e-12, so it is idempotent.
  DensityMap normalized() const {
    double total = 0.0;
    for (double w : weights) total += w;
    DensityMap d{resolution, weights};
    if (std::abs(total - 1.0) > 1e-12) {
      for (double& w : d.weights) w /= total;
    }
    return d;
  }
};

inline DensityMap parse_density_map(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  DensityMap d;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (d.resolution == 0) {
      long long m = 0;
      if (!detail::parse_int(t, m) || m < 1 || m > 4096) throw ConfigError("density map: bad resolution '" + t + "'", line_no);
      d.resolution = static_cast<int>(m);
      continue;
    }
    for (char& c : t) {
      if (c == ',') c = ' ';
    }
    std::istringstream row(t);
    std::string tok;
    int count = 0;
    while (row >> tok) {
      double v = 0.0;
      if (!detail::parse_double(tok, v) || std::isnan(v)) throw ConfigError("density map: not a number '" + tok + "'", line_no);
      if (v < 0.0 || !std::isfinite(v)) throw ConfigError("density map: weight must be finite and nonnegative", line_no);
      d.weights.push_back(v);
      ++count;
    }
    if (count != d.resolution) {
      throw ConfigError("density map: row has " + std::to_string(count) + " entries, expected " + std::to_string(d.resolution),
                        line_no);
    }
  }
  if (d.resolution == 0) throw ConfigError("density map is empty");
  const std::size_t expect = static_cast<std::size_t>(d.resolution) * d.resolution;
  if (d.weights.size() != expect) {
    throw ConfigError("density map has " + std::to_string(d.weights.size() / d.resolution) + " rows, expected " +
                      std::to_string(d.resolution));
  }
  double total = 0.0;
  for (double w : d.weights) total += w;
  if (!(total > 0.0)) throw ConfigError("density map has zero total mass");
  return d.normalized();
}

inline DensityMap load_density_map(const std::filesystem::path& path) {
  try {
    return parse_density_map(detail::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// --- time-slot series ----------------------------------------------------------------

struct TimeSlot {
  std::string label;
  int users;
};

using TimeSlotSeries = std::vector<TimeSlot>;

// One slot per line: "<label> <count>" or "<label>,<count>".
inline TimeSlotSeries parse_timeslots(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  TimeSlotSeries s;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto sep = t.find_last_of(", \t");
    if (sep == std::string::npos) throw ConfigError("time slot needs a label and a count", line_no);
    std::string label = detail::trim(std::string_view(t).substr(0, sep));
    while (!label.empty() && label.back() == ',') label = detail::trim(label.substr(0, label.size() - 1));
    const std::string count = detail::trim(std::string_view(t).substr(sep + 1));
    long long n = 0;
    if (label.empty() || !detail::parse_int(count, n)) throw ConfigError("bad time slot line '" + t + "'", line_no);
    if (n < 1 || n > 1000000) throw ConfigError("time slot user count must be a positive integer", line_no);
    s.push_back({label, static_cast<int>(n)});
  }
  if (s.empty()) throw ConfigError("time slot series is empty");
  return s;
}

inline TimeSlotSeries load_timeslots(const std::filesystem::path& path) {
  try {
    return parse_timeslots(detail::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// --- experiment config -------------------------------------------------------------------

// Everything a run needs besides the subcommand.
struct ExperimentConfig {
  ScenarioConfig scenario;
  std::string timeslots;  // path of the time-slot series, if any
  std::vector<std::string> defenses;  // timeslot defense sweep; empty means scenario.defense

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    const ScenarioConfig &x = a.scenario, &y = b.scenario;
    return x.dimension == y.dimension && x.resolution == y.resolution && x.users == y.users &&
           x.flexibility.fixed == y.flexibility.fixed && x.flexibility.mu == y.flexibility.mu &&
           x.flexibility.sigma == y.flexibility.sigma && x.density == y.density && x.density_source == y.density_source &&
           x.defense == y.defense && x.inference == y.inference && x.estimator == y.estimator && x.trials == y.trials &&
           x.seed == y.seed && x.epsilon == y.epsilon && x.threads == y.threads && x.lp_point_cap == y.lp_point_cap &&
           x.coverage_cutoff == y.coverage_cutoff && a.timeslots == b.timeslots && a.defenses == b.defenses;
  }
};

// INI-style text:
//   [scenario]    dimension, resolution, users, defense, inference, estimator,
//                 trials, seed, epsilon, threads, lp_point_cap, coverage_cutoff
//   [flexibility] values (comma list, one per user) or mu and sigma
//   [prior]       density = uniform | <density map path>
//   [timeslot]    series = <path>, defenses = <comma list>
// Relative paths resolve against `base_dir`. Unknown sections and keys are
// errors; so are repeated keys.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"scenario",
       {"dimension", "resolution", "users", "defense", "inference", "estimator", "trials", "seed", "epsilon", "threads",
        "lp_point_cap", "coverage_cutoff"}},
      {"flexibility", {"values", "mu", "sigma"}},
      {"prior", {"density"}},
      {"timeslot", {"series", "defenses"}},
  };
  ExperimentConfig ec;
  ScenarioConfig& c = ec.scenario;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  std::set<std::string> seen;
  bool has_values = false, has_mu = false;

  auto int_value = [&](const std::string& v, long long lo, long long hi) {
    long long n = 0;
    if (!detail::parse_int(v, n)) throw ConfigError("expected an integer, got '" + v + "'", line_no);
    if (n < lo || n > hi) throw ConfigError("value " + v + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", line_no);
    return n;
  };
  auto real_value = [&](const std::string& v) {
    double d = 0.0;
    if (!detail::parse_double(v, d) || !std::isfinite(d)) throw ConfigError("expected a number, got '" + v + "'", line_no);
    return d;
  };
  auto list_value = [&](const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) throw ConfigError("empty item in list '" + v + "'", line_no);
      out.push_back(item);
    }
    return out;
  };
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).string();
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (const auto hash = t.find('#'); hash != std::string::npos) t = detail::trim(t.substr(0, hash));
    if (t.empty() || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("malformed section header '" + t + "'", line_no);
      section = detail::trim(t.substr(1, t.size() - 2));
      if (!schema.count(section)) throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + t + "'", line_no);
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line_no);
    if (!schema.at(section).count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line_no);
    if (!seen.insert(section + "." + key).second) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line_no);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", line_no);

    if (section == "scenario") {
      if (key == "dimension") c.dimension = static_cast<int>(int_value(value, 1, 2));
      else if (key == "resolution") c.resolution = static_cast<int>(int_value(value, 2, 100000));
      else if (key == "users") c.users = static_cast<int>(int_value(value, 1, 1000000));
      else if (key == "trials") c.trials = static_cast<int>(int_value(value, 1, 100000000));
      else if (key == "threads") c.threads = static_cast<int>(int_value(value, 1, 1024));
      else if (key == "lp_point_cap") c.lp_point_cap = static_cast<std::size_t>(int_value(value, 2, 100000));
      else if (key == "coverage_cutoff") c.coverage_cutoff = static_cast<int>(int_value(value, 1, 100000000));
      else if (key == "epsilon") c.epsilon = real_value(value);
      else if (key == "seed") {
        if (!detail::parse_u64(value, c.seed)) throw ConfigError("seed must be an unsigned 64-bit integer", line_no);
      } else if (key == "defense") {
        const auto d = parse_defense(value);
        if (!d) throw ConfigError("unknown defense '" + value + "' (lp-exact, approx, hide-approx, hide-lp)", line_no);
        c.defense = *d;
      } else if (key == "inference") {
        const auto m = parse_inference_mode(value);
        if (!m) throw ConfigError("unknown inference mode '" + value + "' (weighted-mean, plain-mean, exact-bayes)", line_no);
        c.inference = *m;
      } else if (key == "estimator") {
        const auto e = parse_estimator(value);
        if (!e) throw ConfigError("unknown estimator '" + value + "' (realized, conditional)", line_no);
        c.estimator = *e;
      }
    } else if (section == "flexibility") {
      if (key == "values") {
        has_values = true;
        for (const auto& item : list_value(value)) c.flexibility.fixed.push_back(real_value(item));
      } else if (key == "mu") {
        has_mu = true;
        c.flexibility.mu = real_value(value);
      } else {
        c.flexibility.sigma = real_value(value);
      }
    } else if (section == "prior") {
      if (value == "uniform") {
        c.density.clear();
        c.density_source = "uniform";
      } else {
        c.density_source = value;
        const DensityMap d = load_density_map(resolve(value));
        c.density = d.weights;
        if (d.resolution != c.resolution && seen.count("scenario.resolution")) {
          throw ConfigError("density map resolution " + std::to_string(d.resolution) + " differs from resolution " +
                                std::to_string(c.resolution),
                            line_no);
        }
        c.resolution = d.resolution;
      }
    } else if (section == "timeslot") {
      if (key == "series") ec.timeslots = value;
      else {
        for (const auto& item : list_value(value)) {
          if (!parse_defense(item)) throw ConfigError("unknown defense '" + item + "'", line_no);
          ec.defenses.push_back(item);
        }
      }
    }
  }
  if (has_values && has_mu) throw ConfigError("give either flexibility values or mu/sigma, not both");
  if (c.dimension == 1 && !c.density.empty() && c.density.size() != static_cast<std::size_t>(c.resolution)) {
    // A 2D map read before `dimension = 1` is a mismatch.
    throw ConfigError("density map is two-dimensional but dimension = 1");
  }
  if (c.dimension == 2 && !c.density.empty() &&
      c.density.size() != static_cast<std::size_t>(c.resolution) * static_cast<std::size_t>(c.resolution)) {
    throw ConfigError("density map does not match the 2D grid");
  }
  c.validate();
  return ec;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_file(path), path.parent_path());
}

// Config text that parses back to the same config (paths are echoed as
// given, so reparse from the same base directory).
inline std::string format_config(const ExperimentConfig& ec) {
  const ScenarioConfig& c = ec.scenario;
  std::ostringstream os;
  os << "[scenario]\n";
  os << "dimension = " << c.dimension << "\n";
  os << "resolution = " << c.resolution << "\n";
  os << "users = " << c.users << "\n";
  os << "defense = " << to_string(c.defense) << "\n";
  os << "inference = " << to_string(c.inference) << "\n";
  os << "estimator = " << to_string(c.estimator) << "\n";
  os << "trials = " << c.trials << "\n";
  os << "seed = " << c.seed << "\n";
  os << "epsilon = " << detail::fmt_exact(c.epsilon) << "\n";
  os << "threads = " << c.threads << "\n";
  os << "lp_point_cap = " << c.lp_point_cap << "\n";
  os << "coverage_cutoff = " << c.coverage_cutoff << "\n";
  os << "\n[flexibility]\n";
  if (c.flexibility.is_fixed()) {
    os << "values = ";
    for (std::size_t i = 0; i < c.flexibility.fixed.size(); ++i) os << (i ? ", " : "") << detail::fmt_exact(c.flexibility.fixed[i]);
    os << "\n";
  } else {
    os << "mu = " << detail::fmt_exact(c.flexibility.mu) << "\n";
    os << "sigma = " << detail::fmt_exact(c.flexibility.sigma) << "\n";
  }
  os << "\n[prior]\ndensity = " << c.density_source << "\n";
  if (!ec.timeslots.empty() || !ec.defenses.empty()) {
    os << "\n[timeslot]\n";
    if (!ec.timeslots.empty()) os << "series = " << ec.timeslots << "\n";
    if (!ec.defenses.empty()) {
      os << "defenses = ";
      for (std::size_t i = 0; i < ec.defenses.size(); ++i) os << (i ? ", " : "") << ec.defenses[i];
      os << "\n";
    }
  }
  return os.str();
}

// --- results -----------------------------------------------------------------------------

inline constexpr std::string_view kResultsHeader = "defense,N,order_i,mean_pi,ci_half,trials,seed\n";

// One row per user order plus an `all` aggregate row per result.
inline std::string format_results(const std::vector<SimulationResult>& results) {
  std::string out(kResultsHeader);
  for (const auto& r : results) {
    const std::string tail = "," + std::to_string(r.trials) + "," + std::to_string(r.seed) + "\n";
    const std::string head = std::string(to_string(r.defense)) + "," + std::to_string(r.users) + ",";
    for (int i = 0; i < r.users; ++i) {
      out += head + std::to_string(i + 1) + "," + detail::fmt9(r.mean_pi[static_cast<std::size_t>(i)]) + "," +
             detail::fmt9(r.ci_half[static_cast<std::size_t>(i)]) + tail;
    }
    out += head + "all," + detail::fmt9(r.mean_total) + "," + detail::fmt9(r.ci_total) + tail;
  }
  return out;
}

inline void emit_results(const std::vector<SimulationResult>& results, const std::filesystem::path& path) {
  detail::write_file(path, format_results(results));
}

// --- time-slot study -----------------------------------------------------------------------

struct SlotResult {
  std::string label;
  int users;
  Defense defense;
  SimulationResult result;
};

// One 2D experiment per slot and defense, N = the slot's user count.
inline std::vector<SlotResult> run_timeslot_study(const DensityMap& density, const TimeSlotSeries& slots,
                                                  const ScenarioConfig& config, const std::vector<Defense>& defenses) {
  std::vector<SlotResult> out;
  for (const TimeSlot& s : slots) {
    for (Defense d : defenses) {
      ScenarioConfig cfg = config;
      cfg.dimension = 2;
      cfg.resolution = density.resolution;
      cfg.density = density.weights;
      cfg.users = s.users;
      cfg.defense = d;
      if (cfg.flexibility.is_fixed()) {
        throw ConfigError("time-slot studies draw flexibilities from mu/sigma; fixed lists do not fit varying N");
      }
      out.push_back({s.label, s.users, d, run_experiment(cfg)});
    }
  }
  return out;
}

inline std::string format_timeslot_table(const std::vector<SlotResult>& rows) {
  std::string out = "slot,N,defense,mean_pi,ci_half,trials,seed\n";
  for (const auto& r : rows) {
    out += r.label + "," + std::to_string(r.users) + "," + std::string(to_string(r.defense)) + "," +
           detail::fmt9(r.result.mean_total) + "," + detail::fmt9(r.result.ci_total) + "," + std::to_string(r.result.trials) +
           "," + std::to_string(r.result.seed) + "\n";
  }
  return out;
}

// --- orderings ---------------------------------------------------------------------------

// Users are numbered from 1 in the perm column, query position first.
inline std::string format_order(const std::vector<int>& order) {
  std::string s;
  for (std::size_t i = 0; i < order.size(); ++i) s += (i ? " " : "") + std::to_string(order[i] + 1);
  return s;
}

inline std::string format_ordering(const OrderingResult& r) {
  std::string out = "perm,total_pi,ci_half\n";
  for (const auto& s : r.table) out += format_order(s.order) + "," + detail::fmt9(s.total) + "," + detail::fmt9(s.ci_half) + "\n";
  return out;
}

}  // namespace locpriv
