#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "locpriv/approx.hpp"

using namespace locpriv;

namespace {

// Preimages of x' under the reflection by r, from the branch conditions
// directly: left branch is |x - r| (mirrored at 0), right branch is x + r
// (mirrored at 1).
std::vector<double> branch_preimages(double xp, double r) {
  std::vector<double> out;
  auto add = [&](double x) {
    if (x < -1e-12 || x > 1 + 1e-12) return;
    for (double y : out) {
      if (std::abs(y - x) < 1e-9) return;
    }
    out.push_back(x);
  };
  if (xp + r >= r) add(xp + r);              // x >= r, left = x - r
  if (r - xp >= 0 && r - xp < r) add(r - xp);  // x < r, left = r - x
  if (xp - r >= 0 && xp <= 1) add(xp - r);     // x + r <= 1, right = x + r
  if (2 - r - xp + r > 1) add(2 - r - xp);     // x + r > 1, right = 2 - x - r
  return out;
}

struct Mc {
  double mean, se;
};

// Realized error of the two-point scheme under a uniform prior, attacker
// guessing the plain candidate mean. Continuous x and x'.
Mc mc_scheme(const CacheState& cache, double q, std::optional<double> r_in, double r_out, int n, std::uint64_t seed,
             bool hiding = false, double silent_guess = 0.0) {
  const CoveredIntervals cov(cache, q);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = u(rng);
    const bool in = cov.contains(x);
    double err;
    if (in && hiding) {
      err = std::abs(x - silent_guess);
    } else {
      const double r = in ? *r_in : r_out;
      double xp = u(rng) < 0.5 ? std::abs(x - r) : x + r;
      if (xp > 1.0) xp = 2.0 - xp;
      double sum = 0.0;
      int k = 0;
      if (r_in && !hiding) {
        for (double c : branch_preimages(xp, *r_in)) {
          if (cov.contains(c)) sum += c, ++k;
        }
      }
      for (double c : branch_preimages(xp, r_out)) {
        if (!cov.contains(c)) sum += c, ++k;
      }
      err = std::abs(x - sum / k);
    }
    s += err;
    ss += err * err;
  }
  const double m = s / n;
  return {m, std::sqrt((ss / n - m * m) / n)};
}

}  // namespace

TEST(FirstUser, ClosedForm) {
  EXPECT_DOUBLE_EQ(first_user_params(0.1).pi, 0.09);
  EXPECT_DOUBLE_EQ(first_user_params(0.3).pi, 0.21);
  EXPECT_DOUBLE_EQ(first_user_params(0.5).pi, 0.25);
  EXPECT_DOUBLE_EQ(first_user_params(0.1).r_out, 0.1);
  EXPECT_THROW(first_user_params(0.6), std::invalid_argument);
}

TEST(SecondUser, ClosedFormBranches) {
  EXPECT_DOUBLE_EQ(second_user_r_in(0.02, 0.05), 0.95);
  EXPECT_DOUBLE_EQ(second_user_r_in(0.3, 0.05), 0.7);
  EXPECT_DOUBLE_EQ(second_user_r_in(0.7, 0.05), 0.7);
  EXPECT_DOUBLE_EQ(second_user_r_in(0.99, 0.05), 0.95);
  EXPECT_THROW(second_user_r_in(0.3, 0.1), std::domain_error);
  EXPECT_THROW(second_user_r_in(0.3, 1.0 / 11.0), std::domain_error);
}

TEST(SecondUser, PolynomialsMirrorAndGuard) {
  for (double x : {0.01, 0.2, 0.4}) {
    EXPECT_DOUBLE_EQ(closed_form_pi2(x, 0.05, Pi2Variant::appr), closed_form_pi2(1 - x, 0.05, Pi2Variant::appr));
    EXPECT_DOUBLE_EQ(closed_form_pi2(x, 0.05, Pi2Variant::hide), closed_form_pi2(1 - x, 0.05, Pi2Variant::hide));
  }
  EXPECT_THROW(closed_form_pi2(0.3, 0.2, Pi2Variant::appr), std::domain_error);
}

TEST(Lattice, EmptyCacheIsFirstUser) {
  const Prior p = Prior::uniform(LocationGrid::line(20));
  for (double eps : {1e-2, 1e-3}) {
    for (double q : {0.05, 0.1, 0.3}) {
      const Lattice1d lat({}, q, p, eps, InferenceMode::weighted_mean);
      EXPECT_TRUE(lat.none_covered());
      EXPECT_NEAR(lat.privacy(0), q - q * q, 2e-3) << q << " " << eps;
    }
  }
}

TEST(Lattice, LatticeCellsValidation) {
  EXPECT_EQ(lattice_cells(1e-3), 1000);
  EXPECT_THROW(lattice_cells(0.0), std::invalid_argument);
  EXPECT_THROW(lattice_cells(0.2), std::invalid_argument);
}

// With M = K every lattice report is the grid scheme's report, so the two
// evaluators must agree.
TEST(Lattice, AgreesWithGridEvaluator) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const LocationGrid g = LocationGrid::line(100);
  for (auto mode : {InferenceMode::weighted_mean, InferenceMode::plain_mean, InferenceMode::exact_bayes}) {
    for (int rep = 0; rep < 6; ++rep) {
      std::vector<double> w(100);
      for (auto& v : w) v = rep % 2 ? 0.2 + u(rng) : 1.0;
      const Prior p = Prior::from_weights(g, w);
      // lattice points only, so grid reports land on grid cells
      const CacheState cache = CacheState::of({(std::floor(u(rng) * 100) + 0.5) / 100});
      const double q = (1 + std::floor(u(rng) * 9)) / 100;
      const int j = static_cast<int>(std::floor(u(rng) * 100));
      const Lattice1d lat(cache, q, p, 0.01, mode);
      const SchemeEvaluation ev = evaluate_scheme_1d({j / 100.0, q}, cache, UserProfile(q, p), g, mode);
      EXPECT_NEAR(lat.privacy(j), ev.pi, 1e-9) << rep << " " << to_string(mode);
    }
  }
}

TEST(Lattice, MatchesMonteCarloOracle) {
  const Prior p = Prior::uniform(LocationGrid::line(20));
  struct Case {
    std::vector<double> cache;
    double q, r_in;
  };
  const std::vector<Case> cases{{{0.3}, 0.05, 0.7}, {{0.2, 0.7}, 0.08, 0.35}, {{0.5}, 0.2, 0.1}, {{0.05}, 0.1, 0.9}};
  std::uint64_t seed = 1;
  for (const Case& c : cases) {
    const CacheState cache = CacheState::of(c.cache);
    const Lattice1d lat(cache, c.q, p, 1e-3, InferenceMode::plain_mean);
    const int j = static_cast<int>(std::lround(c.r_in * lat.cells()));
    const Mc mc = mc_scheme(cache, c.q, c.r_in, c.q, 400000, seed++);
    EXPECT_NEAR(lat.privacy(j), mc.mean, 4 * mc.se + 2e-3) << c.q;
    const SilentInference silent = silent_inference(lat.covered(), p, InferenceMode::plain_mean);
    const Mc hide = mc_scheme(cache, c.q, std::nullopt, c.q, 400000, seed++, true, silent.guess);
    EXPECT_NEAR(lat.hiding_privacy(), hide.mean, 4 * hide.se + 2e-3) << c.q;
  }
}

TEST(Lattice, TraceSumsToPrivacy) {
  const Prior p = Prior::uniform(LocationGrid::line(20));
  const Lattice1d lat(CacheState::of({0.4}), 0.07, p, 1e-2, InferenceMode::weighted_mean);
  double pi = 0.0, mass = 0.0;
  for (const auto& o : lat.trace(60)) {
    pi += o.probability * o.error;
    mass += o.probability;
  }
  EXPECT_NEAR(pi / mass, lat.privacy(60), 1e-12);
}

TEST(Algorithm1, ScanFindsLatticeMaximum) {
  const Prior p = Prior::uniform(LocationGrid::line(20));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const CacheState cache = CacheState::of({u(rng), u(rng)});
    const double q = 0.02 + 0.2 * u(rng);
    const Lattice1d lat(cache, q, p, 1e-2, InferenceMode::weighted_mean);
    const Algorithm1Result best = algorithm1_scan(lat);
    for (int j = 0; j <= lat.cells(); ++j) EXPECT_LE(lat.privacy(j), best.pi * (1 + 1e-12));
    EXPECT_DOUBLE_EQ(best.params.r_out, q);
    EXPECT_DOUBLE_EQ(best.params.r_in, best.r_index / 100.0);
    for (int j = 0; j < best.r_index; ++j) EXPECT_LT(lat.privacy(j), best.pi);  // ties go low
  }
}

TEST(Algorithm1, NoCoverageShortcut) {
  const Prior p = Prior::uniform(LocationGrid::line(20));
  const auto r = algorithm1_optimize_r_in(CacheState::of({0.9}), UserProfile(0.0, p), 1e-2, InferenceMode::weighted_mean);
  EXPECT_EQ(r.r_index, 0);
}

TEST(Algorithm1, FullCoverageMemoIsTransparent) {
  const Prior p = Prior::uniform(LocationGrid::line(20));
  FullCoverageMemo memo;
  const CacheState a = CacheState::of({0.5}), b = CacheState::of({0.45, 0.6});
  const UserProfile u(0.5, p);
  const auto m1 = algorithm1_optimize_r_in(a, u, 1e-2, InferenceMode::weighted_mean, &memo);
  const auto m2 = algorithm1_optimize_r_in(b, u, 1e-2, InferenceMode::weighted_mean, &memo);
  const auto d2 = algorithm1_optimize_r_in(b, u, 1e-2, InferenceMode::weighted_mean);
  EXPECT_EQ(m1.pi, m2.pi);
  EXPECT_EQ(m2.pi, d2.pi);
  EXPECT_EQ(m2.r_index, d2.r_index);
}

TEST(Algorithm1, MirroredCacheMirrorsValue) {
  const Prior p = Prior::uniform(LocationGrid::line(20));
  const CacheState c = CacheState::of({0.23, 0.61});
  const auto a = algorithm1_optimize_r_in(c, UserProfile(0.06, p), 1e-2, InferenceMode::plain_mean);
  const auto b = algorithm1_optimize_r_in(c.mirrored(), UserProfile(0.06, p), 1e-2, InferenceMode::plain_mean);
  EXPECT_NEAR(a.pi, b.pi, 1e-9);
}

TEST(SilentInference, CoveredSetMeanAndMedian) {
  const Prior p = Prior::from_weights(LocationGrid::line(2), {1.0, 3.0});
  const CoveredIntervals cov(CacheState::of({0.5}), 0.25);  // [0.25, 0.75]
  const SilentInference mean = silent_inference(cov, p, InferenceMode::weighted_mean);
  EXPECT_NEAR(mean.mass, 0.125 + 0.375, 1e-10);
  // density 0.5 on [.25,.5], 1.5 on [.5,.75]
  EXPECT_NEAR(mean.guess, (0.5 * 0.5 * (0.25 - 0.0625) + 1.5 * 0.5 * (0.5625 - 0.25)) / 0.5, 1e-12);
  const SilentInference med = silent_inference(cov, p, InferenceMode::exact_bayes);
  // half the covered mass (0.25) lies above the median
  EXPECT_NEAR(p.mass_between(med.guess, 0.75), 0.25, 1e-12);
  EXPECT_NEAR(silent_inference(cov, p, InferenceMode::plain_mean).guess, 0.5, 1e-15);
}
