#include "adaptsde/convergence.hpp"
#include "adaptsde/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace adaptsde;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

double cubic(double y) { return y - y * y * y; }

SdeProblem linear2d() {
  SdeProblem p;
  p.name = "linear2d";
  p.dim = 2;
  p.noise_dim = 2;
  Matrix A(2, 2);
  A << -1.0, 0.5, 0.0, -2.0;
  p.drift = [A](const Vector& x, Vector& out) { out = A * x; };
  p.diffusion = [](const Vector&, Matrix& out) { out.setIdentity(); };
  p.jacobian = [A](const Vector&, Matrix& out) { out = A; };
  return p;
}

TEST(DriftExpansion, F1OfCubic) {
  const SdeProblem p = make_cubic_gradient(1);
  for (double y : {-2.0, -0.4, 0.0, 0.7, 1.5}) {
    EXPECT_NEAR(F1(p, scalar(y))[0], (1.0 - 3.0 * y * y) * cubic(y), 1e-13);
  }
}

// A cubic drift has an exact two-term expansion:
// F2(u, h) = f''(u) f(u)^2 / 2 + h f'''(u) f(u)^3 / 6 = -3 u f^2 - h f^3.
TEST(DriftExpansion, F2OfCubicIsExactPolynomial) {
  const SdeProblem p = make_cubic_gradient(1);
  for (double u : {-1.3, -0.2, 0.5, 1.1}) {
    for (double h : {0.01, 0.1, 0.5}) {
      const double f = cubic(u);
      EXPECT_NEAR(F2(p, scalar(u), h)[0], -3.0 * u * f * f - h * f * f * f, 1e-9);
    }
  }
}

TEST(DriftExpansion, LinearDriftHasNoSecondOrderTerm) {
  const SdeProblem p = linear2d();
  Vector u(2);
  u << 0.3, -1.2;
  const double h = 0.125;
  Matrix A(2, 2);
  A << -1.0, 0.5, 0.0, -2.0;
  EXPECT_LT((local_error(p, u, h) - h * A * A * u).norm(), 1e-14);
  EXPECT_LT(F2(p, u, h).norm(), 1e-10);
  EXPECT_THROW(local_error(p, u, 0.0), InvalidArgument);
}

TEST(Diagnostics, SampledCurvatureMatchesGridMaximum) {
  const SdeProblem p = make_cubic_gradient(1);
  const double R = 1.5, dt_max = 0.25;
  const DriftDiagnostics d = estimate_diagnostics(p, R, 0.5, dt_max, 20000, 1.2);
  double grid = 0.0;
  for (int i = 0; i <= 3000; ++i) {
    const double u = -R + 2.0 * R * i / 3000.0;
    const double f = cubic(u);
    for (double h : {1e-9, dt_max}) grid = std::max(grid, std::abs(-3.0 * u * f * f - h * f * f * f));
  }
  EXPECT_LE(d.K_R_sampled, grid * (1.0 + 1e-6));
  EXPECT_GE(d.K_R_sampled, 0.97 * grid);
  EXPECT_DOUBLE_EQ(d.K_R, 1.2 * d.K_R_sampled);
  EXPECT_EQ(d.samples, 20000u);
  EXPECT_DOUBLE_EQ(d.h_bar(), 0.5 / (6.0 * d.K_R));
  EXPECT_DOUBLE_EQ(d.tau_limit(), 0.25 / (12.0 * d.K_R));
}

TEST(Diagnostics, BadSetAndGoodRegion) {
  const SdeProblem p = make_cubic_gradient(1);
  const DriftDiagnostics d = estimate_diagnostics(p, 3.0, 0.5, 1.0, 1000);
  EXPECT_TRUE(d.in_bad_set(scalar(0.0)));
  EXPECT_TRUE(d.in_bad_set(scalar(1.0)));
  EXPECT_FALSE(d.in_bad_set(scalar(2.0)));
  EXPECT_TRUE(d.in_good_region(scalar(2.0)));
  EXPECT_FALSE(d.in_good_region(scalar(3.5)));
  EXPECT_THROW(estimate_diagnostics(p, 0.0, 0.5, 1.0), InvalidArgument);
  EXPECT_THROW(estimate_diagnostics(p, 1.0, 0.5, 1.0, 0), InvalidArgument);
}

TEST(Diagnostics, LinearDriftIsDegenerate) {
  const SdeProblem p = linear2d();
  const DriftDiagnostics d = estimate_diagnostics(p, 2.0, 0.1, 1.0, 500, 1.2);
  EXPECT_LT(d.K_R_sampled, 1e-8);
  // Round-off in F2 leaves K_R tiny but nonzero; forcing zero exercises the flag.
  DriftDiagnostics zero = d;
  zero.K_R = 0.0;
  EXPECT_TRUE(zero.degenerate());
  LemmaBoundChecker checker(zero, 0.01, 1e-3);
  EXPECT_EQ(checker.report().status, LemmaStatus::DegenerateCurvature);
  EXPECT_TRUE(checker.report().passed());
}

class Checker : public ::testing::Test {
 protected:
  SdeProblem p = make_cubic_gradient(1);
  DriftDiagnostics d = estimate_diagnostics(p, 3.0, 0.5, 1.0, 4000);
  double tau = d.tau_limit() / 2.0;
  double bound = std::min(d.h_bar(), 2.0 * tau / 0.5);
};

TEST_F(Checker, FlagsOversizedStepInConditionedSegment) {
  LemmaBoundChecker c(d, tau, bound / 4.0);
  ASSERT_EQ(c.report().status, LemmaStatus::Checked);
  c.begin_path(7);
  c.on_step(0, scalar(2.0), bound / 2.0);
  c.on_step(1, scalar(2.1), bound * 1.5);
  c.on_step(2, scalar(0.0), 10.0 * bound);  // bad set: not checked
  const LemmaReport& r = c.report();
  EXPECT_EQ(r.steps_total, 3u);
  EXPECT_EQ(r.steps_checked, 2u);
  EXPECT_EQ(r.segments, 1u);
  EXPECT_EQ(r.violation_count, 1u);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].path, 7u);
  EXPECT_EQ(r.violations[0].n, 1u);
  EXPECT_NEAR(r.max_ratio, 1.5, 1e-12);
  EXPECT_FALSE(r.passed());
}

TEST_F(Checker, SegmentEnteredWithLargeStepIsUnconditioned) {
  LemmaBoundChecker c(d, tau, bound / 4.0);
  c.begin_path(0);
  c.on_step(0, scalar(0.0), 1.0);          // bad set, large step
  c.on_step(1, scalar(2.0), 2.0 * bound);  // enters good region after a large step
  c.on_step(2, scalar(2.0), bound / 2.0);
  c.on_step(3, scalar(0.0), bound / 4.0);
  c.on_step(4, scalar(2.0), bound / 2.0);  // re-entry after a small step
  const LemmaReport& r = c.report();
  EXPECT_EQ(r.segments_unconditioned, 1u);
  EXPECT_EQ(r.steps_unconditioned, 2u);
  EXPECT_EQ(r.unconditioned_over_bound, 1u);
  EXPECT_EQ(r.segments, 1u);
  EXPECT_EQ(r.steps_checked, 1u);
  EXPECT_TRUE(r.passed());
}

TEST_F(Checker, HypothesisViolations) {
  EXPECT_EQ(LemmaBoundChecker(d, 2.0 * d.tau_limit(), 1e-6).report().status,
            LemmaStatus::HypothesisViolated);
  EXPECT_EQ(LemmaBoundChecker(d, tau, 1.0).report().status, LemmaStatus::HypothesisViolated);
}

TEST_F(Checker, MergeAddsCounts) {
  LemmaBoundChecker a(d, tau, bound / 4.0), b(d, tau, bound / 4.0);
  a.begin_path(0);
  a.on_step(0, scalar(2.0), 2.0 * bound);
  b.begin_path(1);
  b.on_step(0, scalar(2.0), bound / 2.0);
  LemmaReport r = a.report();
  r.merge(b.report());
  EXPECT_EQ(r.paths, 2u);
  EXPECT_EQ(r.steps_checked, 2u);
  EXPECT_EQ(r.violation_count, 1u);
  EXPECT_NEAR(r.max_ratio, 2.0, 1e-12);
}

// On real trajectories with the bound's hypotheses in force, every
// conditioned step stays below min(h_bar, 2 tau / eps).
TEST(TimestepBound, HoldsOnAdaptivePaths) {
  const SdeProblem p = make_cubic_gradient(1);
  const MethodPair pair = euler_pair(p);
  const DriftDiagnostics d = estimate_diagnostics(p, 1.5, 0.5, 1.0, 10000, 1.2);
  StepperConfig c;
  c.tol = 0.5 * 0.5 / (24.0 * d.K_R);
  c.k_init = 0;
  while (!(c.dt_of(c.k_init) < 2.0 * c.tol / 0.5)) ++c.k_init;
  LemmaReport total;
  for (std::uint64_t i = 0; i < 10; ++i) {
    NoiseStream s(3, i);
    const Trajectory tr = run_path(scalar(1.2), c, pair, &s, 2.0, true);
    total.merge(timestep_bound_check(tr, d, c.tol, c.dt_of(c.k_init)));
  }
  EXPECT_GT(total.steps_checked, 0u);
  EXPECT_EQ(total.violation_count, 0u);
  EXPECT_LE(total.max_ratio, 1.0);
}

StrongErrorConfig small_sweep(int threads) {
  StrongErrorConfig c;
  c.taus = {0.25, 1.0 / 64.0};
  c.horizon = 1.0;
  c.paths = 24;
  c.ref_exponent = 12;
  c.grid_exponent = 8;
  c.x0 = Vector::Constant(2, 0.5);
  c.seed = 5;
  c.threads = threads;
  return c;
}

TEST(StrongError, SmallerToleranceSmallerError) {
  const SdeProblem p = make_cubic_gradient(2);
  const StrongErrorReport r = strong_error(p, euler_pair(p), small_sweep(1));
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_LT(r.rows[1].mse, r.rows[0].mse);
  EXPECT_GT(r.rows[1].mean_steps, r.rows[0].mean_steps);
  EXPECT_EQ(r.rows[0].paths_used + r.rows[0].paths_truncated, 24u);
  EXPECT_GE(r.reference_self_difference, 0.0);
  EXPECT_LT(r.reference_self_difference, 0.1 * r.rows[1].mse);
  EXPECT_LT(r.rows[0].runtime_seconds, 0.0);
}

TEST(StrongError, ThreadCountDoesNotChangeResult) {
  const SdeProblem p = make_cubic_gradient(2);
  const StrongErrorReport a = strong_error(p, euler_pair(p), small_sweep(1));
  const StrongErrorReport b = strong_error(p, euler_pair(p), small_sweep(3));
  std::ostringstream sa, sb;
  write_strong_error_csv(sa, a);
  write_strong_error_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

// Without noise the reference is plain Euler on dy = (y - y^3) dt, whose
// fine-step limit is the exact flow y(t)^2 = 1 / (1 + 3 exp(-2t)) from
// y(0) = 1/2. The adaptive error then follows from the drift-only path.
TEST(StrongError, DeterministicLimitAgainstOdeFlow) {
  SdeProblem p = with_diffusion_scale(make_cubic_gradient(1), 0.0);
  StrongErrorConfig c;
  c.taus = {1.0 / 16.0};
  c.horizon = 1.0;
  c.paths = 2;
  c.ref_exponent = 14;
  c.grid_exponent = 10;
  c.reference_check = false;
  c.x0 = scalar(0.5);
  const StrongErrorReport r = strong_error(p, euler_pair(p), c);

  StepperConfig sc = c.stepper;
  sc.tol = c.taus[0];
  const Trajectory tr = run_path(c.x0, sc, euler_pair(p), ZeroNoise{}, 1.0, true);
  auto exact = [](double t) { return 1.0 / std::sqrt(1.0 + 3.0 * std::exp(-2.0 * t)); };
  auto adaptive = [&](double t) {
    std::size_t n = 0;
    while (n + 1 < tr.times.size() && tr.times[n + 1] <= t) ++n;
    const double w = (t - tr.times[n]) / (tr.times[n + 1] - tr.times[n]);
    return (1.0 - w) * tr.states[n][0] + w * tr.states[n + 1][0];
  };
  double sup = 0.0;
  for (int g = 0; g <= 1024; ++g) {
    const double t = g / 1024.0;
    sup = std::max(sup, std::pow(adaptive(t) - exact(t), 2));
  }
  for (double t : tr.times) {
    if (t <= 1.0) sup = std::max(sup, std::pow(adaptive(t) - exact(t), 2));
  }
  ASSERT_GT(sup, 0.0);
  EXPECT_NEAR(r.rows[0].mse, sup, 0.02 * sup);
  EXPECT_EQ(r.rows[0].stderr_, 0.0);
}

}  // namespace
