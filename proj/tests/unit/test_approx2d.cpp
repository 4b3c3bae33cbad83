#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "locpriv/approx2d.hpp"

using namespace locpriv;

namespace {

// Lattice privacy through the generic candidate-set path.
double generic_privacy(const CacheState& cache, double q, const Prior& p, int cells, int j, InferenceMode mode) {
  const CoveredDiscs cov(cache, q);
  double num = 0.0, den = 0.0;
  for (int ky = 0; ky < cells; ++ky) {
    for (int kx = 0; kx < cells; ++kx) {
      const Point xp{(kx + 0.5) / cells, (ky + 0.5) / cells};
      const CandidateSet2 c = candidate_set_2d(static_cast<double>(j) / cells, std::min(q, 0.5), xp, cov);
      if (c.empty()) continue;
      const Point g = scheme_inference_2d(c, p, mode);
      for (const auto& e : c) {
        const double w = p.density(e.location) * e.likelihood;
        num += w * distance(e.location, g);
        den += w;
      }
    }
  }
  return num / den;
}

}  // namespace

TEST(Lattice2d, FastPathMatchesGenericPath) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const LocationGrid g = LocationGrid::square(10);
  std::vector<double> w(g.size());
  for (auto& v : w) v = 0.2 + u(rng);
  for (const Prior& p : {Prior::uniform(g), Prior::from_weights(g, w)}) {
    for (auto mode : {InferenceMode::weighted_mean, InferenceMode::plain_mean, InferenceMode::exact_bayes}) {
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<Point> pts{{u(rng), u(rng)}, {u(rng), u(rng)}};
        const CacheState cache = CacheState::of_points(pts);
        const double q = 0.05 + 0.2 * u(rng);
        const Lattice2d lat(cache, q, p, 0.05, mode);
        const int j = static_cast<int>(u(rng) * 20);
        EXPECT_NEAR(lat.privacy(j), generic_privacy(cache, q, p, 20, j, mode), 1e-12) << to_string(mode);
      }
    }
  }
}

TEST(Lattice2d, WeightedMeanUnderUniformIsBitIdentical) {
  const Prior p = Prior::uniform(LocationGrid::square(20));
  std::vector<Point> pts{{0.3, 0.6}, {0.7, 0.2}};
  const CacheState cache = CacheState::of_points(pts);
  const Lattice2d a(cache, 0.1, p, 0.02, InferenceMode::weighted_mean);
  const Lattice2d b(cache, 0.1, p, 0.02, InferenceMode::plain_mean);
  for (int j = 0; j <= 50; j += 7) EXPECT_EQ(a.privacy(j), b.privacy(j));
}

TEST(Lattice2d, EmptyCacheMatchesMonteCarlo) {
  const double q = 0.1;
  const Prior p = Prior::uniform(LocationGrid::square(20));
  const Lattice2d lat({}, q, p, 1e-2, InferenceMode::plain_mean);
  EXPECT_TRUE(lat.none_covered());
  // oracle: independent axis reflections, attacker takes the mean of the
  // distinct candidate coordinates on each axis
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto axis_guess = [&](double xp) {
    double s = 0.0;
    int k = 0;
    for (double c : {xp + q, q - xp, xp - q, 2 - q - xp}) {
      if (c < 0 || c > 1) continue;
      const Reflection f = reflect_query(c, q);
      if (std::abs(f.left - xp) > 1e-9 && std::abs(f.right - xp) > 1e-9) continue;
      s += c;
      ++k;
    }
    return s / k;
  };
  const int n = 400000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const Point x{u(rng), u(rng)};
    const Reflection fx = reflect_query(x.x, q), fy = reflect_query(x.y, q);
    const Point xp{u(rng) < 0.5 ? fx.left : fx.right, u(rng) < 0.5 ? fy.left : fy.right};
    const double e = distance(x, Point{axis_guess(xp.x), axis_guess(xp.y)});
    s += e;
    ss += e * e;
  }
  const double m = s / n, se = std::sqrt((ss / n - m * m) / n);
  EXPECT_NEAR(lat.privacy(0), m, 4 * se + 2e-3);
}

TEST(Lattice2d, ConcentratedDensityLeavesLittlePrivacy) {
  const LocationGrid g = LocationGrid::square(10);
  std::vector<double> w(g.size(), 0.0);
  w[55] = 1.0;
  const Prior p = Prior::from_weights(g, w);
  const Lattice2d lat({}, 0.1, p, 1e-2, InferenceMode::weighted_mean);
  EXPECT_LT(lat.privacy(0), 0.01);
}

TEST(Lattice2d, Algorithm2BeatsEveryLatticePoint) {
  const Prior p = Prior::uniform(LocationGrid::square(10));
  std::vector<Point> pts{{0.4, 0.5}};
  const CacheState cache = CacheState::of_points(pts);
  const Lattice2d lat(cache, 0.1, p, 0.05, InferenceMode::weighted_mean);
  const Algorithm1Result r = algorithm2_scan(lat);
  for (int j = 0; j <= lat.cells(); ++j) EXPECT_LE(lat.privacy(j), r.pi * (1 + 1e-12));
  const auto r2 = algorithm2_optimize_r_in_2d(cache, UserProfile(0.1, p), 0.05, InferenceMode::weighted_mean);
  EXPECT_EQ(r.pi, r2.pi);
}

TEST(DiscCover, ConservativeFullCoverage) {
  std::vector<Point> mid{{0.5, 0.5}};
  EXPECT_TRUE(discs_cover_square(CacheState::of_points(mid), 0.71, 10));
  EXPECT_FALSE(discs_cover_square(CacheState::of_points(mid), 0.5, 10));
  EXPECT_FALSE(discs_cover_square({}, 0.5, 10));
}

TEST(SilentInference2d, UniformMeansAgree) {
  const Prior p = Prior::uniform(LocationGrid::square(10));
  std::vector<Point> pts{{0.2, 0.2}};
  const CacheState cache = CacheState::of_points(pts);
  const auto a = silent_inference_2d(cache, 0.15, p, 50, InferenceMode::weighted_mean);
  const auto b = silent_inference_2d(cache, 0.15, p, 50, InferenceMode::plain_mean);
  EXPECT_NEAR(a.guess.x, b.guess.x, 1e-12);
  EXPECT_NEAR(a.guess.x, 0.2, 1e-3);
  EXPECT_NEAR(a.mass, M_PI * 0.15 * 0.15, 5e-3);
  const auto m = silent_inference_2d(cache, 0.15, p, 50, InferenceMode::exact_bayes);
  EXPECT_LE(m.num, a.num + 1e-12);
}
