#include <gtest/gtest.h>

#include <cmath>

#include "locpriv/simulator.hpp"

using namespace locpriv;

namespace {

ScenarioConfig base(Defense d, int users, int trials) {
  ScenarioConfig c;
  c.defense = d;
  c.users = users;
  c.trials = trials;
  c.seed = 17;
  return c;
}

}  // namespace

TEST(Config, Validation) {
  ScenarioConfig c = base(Defense::approx, 3, 10);
  c.flexibility.fixed = {0.1, 0.2};
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("2 entries"), std::string::npos) << m;
    EXPECT_NE(m.find("N = 3"), std::string::npos) << m;
  }
  ScenarioConfig lp = base(Defense::lp_exact, 1, 10);
  lp.resolution = 128;
  try {
    lp.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cap of 64"), std::string::npos);
  }
  ScenarioConfig mu = base(Defense::approx, 1, 10);
  mu.flexibility.mu = 1.5;
  EXPECT_THROW(mu.validate(), ConfigError);
}

TEST(Simulator, EnumNames) {
  for (auto d : {Defense::lp_exact, Defense::approx, Defense::hide_approx, Defense::hide_lp}) {
    EXPECT_EQ(parse_defense(to_string(d)), d);
  }
  EXPECT_FALSE(parse_defense("hide"));
  EXPECT_EQ(parse_estimator("conditional"), Estimator::conditional);
}

TEST(Simulator, FirstUserMonteCarlo) {
  ScenarioConfig c = base(Defense::approx, 1, 20000);
  c.flexibility.fixed = {0.1};
  const SimulationResult r = run_experiment(c);
  EXPECT_NEAR(r.mean_total, 0.09, std::max(0.002, 2 * r.ci_total));
  c.estimator = Estimator::conditional;
  c.trials = 5;
  const SimulationResult e = run_experiment(c);
  EXPECT_NEAR(e.mean_total, 0.09, 1e-9);
}

TEST(Simulator, ThreadCountNeverChangesResults) {
  for (auto d : {Defense::approx, Defense::hide_approx, Defense::lp_exact, Defense::hide_lp}) {
    ScenarioConfig c = base(d, 4, 60);
    const SimulationResult a = run_experiment(c);
    c.threads = 3;
    const SimulationResult b = run_experiment(c);
    EXPECT_EQ(a.per_trial, b.per_trial) << to_string(d);
    EXPECT_EQ(a.mean_total, b.mean_total);
    EXPECT_EQ(a.ci_total, b.ci_total);
  }
}

TEST(Simulator, SeedChangesDraws) {
  ScenarioConfig c = base(Defense::approx, 2, 30);
  const SimulationResult a = run_experiment(c);
  c.seed = 18;
  EXPECT_NE(a.per_trial, run_experiment(c).per_trial);
}

// Later users never influence earlier ones, so an N-user run is a prefix
// of a longer run on the same seed.
TEST(Simulator, PrefixProperty) {
  for (auto d : {Defense::approx, Defense::hide_approx}) {
    ScenarioConfig c = base(d, 8, 40);
    const SimulationResult big = run_experiment(c);
    c.users = 3;
    const SimulationResult small = run_experiment(c);
    for (int k = 0; k < 40; ++k) {
      for (int i = 0; i < 3; ++i) EXPECT_EQ(small.value(k, i), big.value(k, i));
    }
    const auto avg = prefix_average(big, 3);
    EXPECT_EQ(mean_ci(avg).mean, small.mean_total);
  }
}

TEST(Simulator, DefensesShareDraws) {
  // the first user never sees a cache, so approx and hide-approx coincide
  ScenarioConfig c = base(Defense::approx, 2, 50);
  const SimulationResult a = run_experiment(c);
  c.defense = Defense::hide_approx;
  const SimulationResult h = run_experiment(c);
  for (int k = 0; k < 50; ++k) EXPECT_EQ(a.value(k, 0), h.value(k, 0));
}

TEST(Simulator, LpDefenseConditionalIsLpValue) {
  ScenarioConfig c = base(Defense::lp_exact, 1, 3);
  c.flexibility.fixed = {0.1};
  c.estimator = Estimator::conditional;
  EXPECT_NEAR(run_experiment(c).mean_total, 0.09, 1e-9);
}

TEST(Simulator, TwoDimensionalRuns) {
  ScenarioConfig c = base(Defense::approx, 3, 20);
  c.dimension = 2;
  c.resolution = 10;
  c.epsilon = 0.05;
  const SimulationResult r = run_experiment(c);
  EXPECT_EQ(r.per_trial.size(), 60u);
  for (double v : r.per_trial) EXPECT_TRUE(v >= 0.0 && v <= std::sqrt(2.0));
  c.threads = 2;
  EXPECT_EQ(run_experiment(c).per_trial, r.per_trial);
}

TEST(Simulator, RealizedAveragesToConditional) {
  // over many trials the realized error estimates the conditional value
  ScenarioConfig c = base(Defense::approx, 2, 6000);
  c.flexibility.fixed = {0.1, 0.05};
  const SimulationResult real = run_experiment(c);
  c.estimator = Estimator::conditional;
  const SimulationResult cond = run_experiment(c);
  EXPECT_NEAR(real.mean_pi[1], cond.mean_pi[1], 3 * real.ci_half[1] + 0.003);
}

TEST(MeanCi, NormalApproximation) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const MeanCi m = mean_ci(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.half, 1.96 * std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}

TEST(ParallelFor, RethrowsWorkerErrors) {
  EXPECT_THROW(parallel_for(10, 3, [](int i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Coverage, TerminatesAndReportsQuartiles) {
  ScenarioConfig c = base(Defense::approx, 1, 300);
  c.flexibility.fixed = {0.25};
  const CoverageStats s = coverage_stats(c);
  EXPECT_EQ(s.overflow_fraction, 0.0);
  EXPECT_GE(s.median, 2.0);
  EXPECT_LE(s.q1, s.median);
  EXPECT_LE(s.median, s.q3);
  c.threads = 2;
  EXPECT_EQ(coverage_stats(c).n_prime, s.n_prime);
}

TEST(Coverage, CutoffIsReported) {
  ScenarioConfig c = base(Defense::approx, 1, 20);
  c.flexibility.fixed = {0.01};
  c.coverage_cutoff = 5;
  const CoverageStats s = coverage_stats(c);
  EXPECT_EQ(s.overflow_fraction, 1.0);
  EXPECT_EQ(s.median, 5.0);
}
