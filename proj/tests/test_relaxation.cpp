#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "tilin/oracle.hpp"
#include "tilin/relaxation.hpp"

using namespace tilin;

namespace {

constexpr ActivationKind kSShaped[] = {ActivationKind::Sigmoid, ActivationKind::Tanh,
                                       ActivationKind::Arctan};

/// Tangent point of the line through (e, f(e)) found by the test's own bisection.
double oracle_tangent(ActivationKind k, double e, double lo, double hi) {
  return oracle::bisect([&](double t) { return oracle::tangent_residual(k, t, e); }, lo, hi);
}

}  // namespace

TEST(TangentAnchor, SigmoidSymmetricInterval) {
  const double xs = tangent_lower_anchor(ActivationKind::Sigmoid, -2.0, 2.0);
  const double ref = oracle_tangent(ActivationKind::Sigmoid, -2.0, 1e-12, 2.0);
  EXPECT_NEAR(xs, ref, 1e-9);
  EXPECT_NEAR(xs, 0.91660, 5e-5);
  EXPECT_LT(std::abs(oracle::tangent_residual(ActivationKind::Sigmoid, xs, -2.0)), 1e-10);
  const double xss = tangent_upper_anchor(ActivationKind::Sigmoid, -2.0, 2.0);
  EXPECT_NEAR(xss, -xs, 1e-9);
}

TEST(TangentAnchor, TanhResidual) {
  const double xs = tangent_lower_anchor(ActivationKind::Tanh, -3.0, 3.0);
  EXPECT_GT(xs, 0.0);
  EXPECT_LT(xs, 3.0);
  EXPECT_LT(std::abs(oracle::tangent_residual(ActivationKind::Tanh, xs, -3.0)), 1e-10);
}

TEST(TangentAnchor, TinyIntervalHasNoTangentPoint) {
  // chord slope ~ f'(0) > f'(u): precondition holds only barely or not at all;
  // either way the relaxation falls back to a sound line.
  const double l = -1e-6, u = 1e-6;
  const double k = (oracle::f(ActivationKind::Sigmoid, u) - oracle::f(ActivationKind::Sigmoid, l)) / (u - l);
  EXPECT_NEAR(k, 0.25, 1e-10);
  const ScalarRelaxation r = sshape_bounds(ActivationKind::Sigmoid, l, u, 0.0);
  EXPECT_LE(oracle::grid_violation(ActivationKind::Sigmoid, r, 1001), 1e-12);
}

TEST(TangentAnchor, PreconditionViolations) {
  EXPECT_THROW(tangent_lower_anchor(ActivationKind::ReLU, -1.0, 1.0), NoTangentPoint);
  EXPECT_THROW(tangent_lower_anchor(ActivationKind::Sigmoid, 0.5, 1.0), NoTangentPoint);
  // k <= f'(u): u sits close to the inflection point
  EXPECT_THROW(tangent_lower_anchor(ActivationKind::Sigmoid, -3.0, 0.1), NoTangentPoint);
  EXPECT_THROW(tangent_upper_anchor(ActivationKind::Sigmoid, -0.1, 3.0), NoTangentPoint);
}

TEST(SShape, SigmoidCaseOneGolden) {
  const auto k = ActivationKind::Sigmoid;
  const ScalarRelaxation r = sshape_bounds(k, -2.0, 2.0, 0.0);
  const double xs = oracle_tangent(k, -2.0, 1e-12, 2.0);
  EXPECT_EQ(r.upper_rule, LineRule::TangentThroughLower);
  EXPECT_NEAR(r.upper_touch, xs, 1e-9);
  EXPECT_NEAR(r.upper.slope, oracle::df(k, xs), 1e-9);
  EXPECT_EQ(r.lower_rule, LineRule::TangentThroughUpper);
  EXPECT_NEAR(r.lower_touch, -xs, 1e-9);
  EXPECT_LE(oracle::grid_violation(k, r, 1000), 1e-12);
  // upper passes through (l, f(l)), lower through (u, f(u))
  EXPECT_NEAR(r.upper(-2.0), oracle::f(k, -2.0), 1e-10);
  EXPECT_NEAR(r.lower(2.0), oracle::f(k, 2.0), 1e-10);
}

TEST(SShape, SigmoidConcaveRegionGolden) {
  // Entirely in the concave part: k_ml = f(2)-f(1) = 0.1497 exceeds f'(2) = 0.1050,
  // so the upper line is the tangent at m; k = 0.1108 < f'(1) = 0.1966 gives the chord below.
  const auto k = ActivationKind::Sigmoid;
  const ScalarRelaxation r = sshape_bounds(k, 1.0, 3.0, 2.0);
  EXPECT_EQ(r.upper_rule, LineRule::TangentAtAnchor);
  EXPECT_NEAR(r.upper.slope, oracle::df(k, 2.0), 1e-15);
  EXPECT_NEAR(r.upper(2.0), oracle::f(k, 2.0), 1e-15);
  EXPECT_EQ(r.lower_rule, LineRule::Chord);
  EXPECT_NEAR(r.lower.slope, (oracle::f(k, 3.0) - oracle::f(k, 1.0)) / 2.0, 1e-15);
  EXPECT_NEAR(r.lower.slope, 0.11076, 1e-5);
  EXPECT_LE(oracle::grid_violation(k, r, 1000), 1e-12);
}

TEST(SShape, DegenerateInterval) {
  for (auto k : kSShaped) {
    const ScalarRelaxation r = sshape_bounds(k, 0.7, 0.7, 0.7);
    EXPECT_EQ(r.upper.slope, 0.0);
    EXPECT_EQ(r.lower.slope, 0.0);
    EXPECT_DOUBLE_EQ(r.upper.intercept, oracle::f(k, 0.7));
    EXPECT_DOUBLE_EQ(r.lower.intercept, oracle::f(k, 0.7));
  }
}

TEST(SShape, NegativeAnchorMirrorsPositive) {
  // Odd symmetry of tanh: relaxation at (l,u,m) mirrors the one at (-u,-l,-m).
  const auto k = ActivationKind::Tanh;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(-6.0, 6.0);
  for (int i = 0; i < 300; ++i) {
    double l = d(rng), u = d(rng);
    if (l > u) std::swap(l, u);
    if (u - l < 1e-3) continue;
    const double m = l + (u - l) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (std::abs(m) < 1e-9) continue;
    const ScalarRelaxation a = sshape_bounds(k, l, u, m);
    const ScalarRelaxation b = sshape_bounds(k, -u, -l, -m);
    EXPECT_NEAR(a.upper.slope, b.lower.slope, 1e-9);
    EXPECT_NEAR(a.upper.intercept, -b.lower.intercept, 1e-9);
    EXPECT_NEAR(a.lower.slope, b.upper.slope, 1e-9);
  }
}

TEST(SShape, TangentLinesTouchCurve) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  for (auto k : kSShaped) {
    for (int i = 0; i < 2000; ++i) {
      double l = d(rng), u = d(rng);
      if (l > u) std::swap(l, u);
      const double m = std::uniform_real_distribution<double>(l, u)(rng);
      const ScalarRelaxation r = sshape_bounds(k, l, u, m);
      if (r.upper_rule == LineRule::TangentAtAnchor || r.upper_rule == LineRule::TangentThroughLower) {
        EXPECT_NEAR(r.upper(r.upper_touch), oracle::f(k, r.upper_touch), 1e-9);
      }
      if (r.lower_rule == LineRule::TangentAtAnchor || r.lower_rule == LineRule::TangentThroughUpper) {
        EXPECT_NEAR(r.lower(r.lower_touch), oracle::f(k, r.lower_touch), 1e-9);
      }
      if (r.upper_rule == LineRule::TangentThroughLower) EXPECT_NEAR(r.upper(l), oracle::f(k, l), 1e-9);
      if (r.lower_rule == LineRule::TangentThroughUpper) EXPECT_NEAR(r.lower(u), oracle::f(k, u), 1e-9);
      EXPECT_LE(r.lower(m), r.upper(m) + 1e-12);
    }
  }
}

TEST(SShape, ShrinkConsistency) {
  // Deviation from the tangent at the centre decays quadratically in the width.
  for (auto k : kSShaped) {
    const double c = 0.8;
    std::vector<double> dev;
    for (double w : {1e-2, 1e-3, 1e-4}) {
      const double l = c - w / 2, u = c + w / 2;
      const ScalarRelaxation r = relax(k, l, u, c, AnchorPolicy::Midpoint);
      double worst = 0.0;
      for (int i = 0; i <= 100; ++i) {
        const double x = l + (u - l) * i / 100.0;
        const double tangent = oracle::f(k, c) + oracle::df(k, c) * (x - c);
        worst = std::max({worst, std::abs(r.upper(x) - tangent), std::abs(r.lower(x) - tangent)});
      }
      dev.push_back(worst);
    }
    EXPECT_NEAR(dev[0] / dev[1], 100.0, 15.0) << to_string(k);
    EXPECT_NEAR(dev[1] / dev[2], 100.0, 15.0) << to_string(k);
  }
}

TEST(ReLU, ChordExamples) {
  const ScalarRelaxation a = relu_bounds(-1.0, 2.0, 0.5);
  EXPECT_NEAR(a.upper.slope, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(a.upper.intercept, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(a.lower.slope, 1.0);
  EXPECT_EQ(a.lower.intercept, 0.0);
  const ScalarRelaxation b = relu_bounds(-3.0, 1.0, -1.0);
  EXPECT_NEAR(b.upper.slope, 0.25, 1e-15);
  EXPECT_NEAR(b.upper.intercept, 0.75, 1e-15);
  EXPECT_EQ(b.lower.slope, 0.0);
  EXPECT_EQ(b.lower.intercept, 0.0);
  for (double m : {1.0, 2.5, 4.0}) {
    const ScalarRelaxation c = relu_bounds(1.0, 4.0, m);
    EXPECT_EQ(c.upper.slope, 1.0);
    EXPECT_EQ(c.lower.slope, 1.0);
    EXPECT_EQ(c.upper.intercept, 0.0);
  }
  const ScalarRelaxation d = relu_bounds(-4.0, -1.0, -2.0);
  EXPECT_EQ(d.upper.slope, 0.0);
  EXPECT_EQ(d.upper.intercept, 0.0);
  for (const auto& r : {a, b}) EXPECT_LE(oracle::grid_violation(ActivationKind::ReLU, r, 1000), 1e-15);
}

TEST(Relax, AnchorPolicies) {
  EXPECT_EQ(relax(ActivationKind::ReLU, -1.0, 1.0, 0.2, AnchorPolicy::ForwardValue).lower.slope, 1.0);
  const ScalarRelaxation clamped = relax(ActivationKind::ReLU, -1.0, 1.0, 5.0, AnchorPolicy::ForwardValue);
  EXPECT_EQ(clamped.anchor, 1.0);
  EXPECT_EQ(clamped.lower.slope, 1.0);
  const ScalarRelaxation mid = relax(ActivationKind::Sigmoid, -2.0, 4.0, -1.7, AnchorPolicy::Midpoint);
  const ScalarRelaxation ref = sshape_bounds(ActivationKind::Sigmoid, -2.0, 4.0, 1.0);
  EXPECT_EQ(mid.anchor, 1.0);
  EXPECT_EQ(mid.upper.slope, ref.upper.slope);
  EXPECT_EQ(mid.upper.intercept, ref.upper.intercept);
  EXPECT_EQ(mid.lower.slope, ref.lower.slope);
  EXPECT_EQ(mid.lower.intercept, ref.lower.intercept);
}

TEST(Relax, ParsePolicy) {
  EXPECT_EQ(parse_policy("forward"), AnchorPolicy::ForwardValue);
  EXPECT_EQ(parse_policy("midpoint"), AnchorPolicy::Midpoint);
  EXPECT_THROW(parse_policy("center"), std::invalid_argument);
}

TEST(Relax, ExactSoundnessRandom) {
  // Exact check through stationary points, not just a grid.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> d(-20.0, 20.0);
  for (auto k : {ActivationKind::ReLU, ActivationKind::Sigmoid, ActivationKind::Tanh, ActivationKind::Arctan}) {
    for (int i = 0; i < 3000; ++i) {
      double l = d(rng), u = d(rng);
      if (l > u) std::swap(l, u);
      const double pre = d(rng);
      const auto policy = i % 2 ? AnchorPolicy::Midpoint : AnchorPolicy::ForwardValue;
      const ScalarRelaxation r = relax(k, l, u, pre, policy);
      EXPECT_LE(oracle::max_excess_over(k, r.upper.slope, r.upper.intercept, l, u), 1e-12)
          << to_string(k) << " [" << l << "," << u << "] m=" << r.anchor;
      EXPECT_LE(oracle::max_deficit_under(k, r.lower.slope, r.lower.intercept, l, u), 1e-12)
          << to_string(k) << " [" << l << "," << u << "] m=" << r.anchor;
    }
  }
}

TEST(Area, ClosedForms) {
  ScalarRelaxation r;
  r.l = 0.0;
  r.u = 2.0;
  r.upper = ScalarLine::constant(1.0);
  r.lower = ScalarLine::constant(0.0);
  EXPECT_DOUBLE_EQ(relaxation_area(r), 2.0);
  r.lower = r.upper;
  EXPECT_DOUBLE_EQ(relaxation_area(r), 0.0);
}

TEST(Area, MidpointNoWorseThanParallelChords) {
  // Parallel-chord pair: chord slope, shifted to the extreme residuals. Always sound.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(-8.0, 8.0);
  const auto k = ActivationKind::Sigmoid;
  for (int i = 0; i < 1000; ++i) {
    double l = d(rng), u = d(rng);
    if (l > u) std::swap(l, u);
    if (u - l < 1e-6) continue;
    const double slope = (oracle::f(k, u) - oracle::f(k, l)) / (u - l);
    const double b0 = oracle::f(k, l) - slope * l;
    const double up = b0 + oracle::max_excess_over(k, slope, b0, l, u);
    const double lo = b0 - oracle::max_deficit_under(k, slope, b0, l, u);
    ScalarRelaxation chords;
    chords.l = l;
    chords.u = u;
    chords.upper = {slope, up};
    chords.lower = {slope, lo};
    const ScalarRelaxation mid = relax(k, l, u, 0.0, AnchorPolicy::Midpoint);
    EXPECT_LE(relaxation_area(mid), relaxation_area(chords) + 1e-12) << l << " " << u;
  }
}
