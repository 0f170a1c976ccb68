#include "adaptsde/errors.hpp"
#include "adaptsde/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace adaptsde;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TEST(Cubic, DriftValues) {
  const SdeProblem p = make_cubic_gradient(1);
  EXPECT_EQ(p.drift_at(vec({0.0}))[0], 0.0);
  EXPECT_EQ(p.drift_at(vec({2.0}))[0], -6.0);
  EXPECT_EQ(p.drift_at(vec({1.0}))[0], 0.0);
}

TEST(Cubic, ComponentsAreDecoupledCopies) {
  const SdeProblem p = make_cubic_gradient(3);
  const Vector f = p.drift_at(vec({0.5, -2.0, 1.5}));
  EXPECT_DOUBLE_EQ(f[0], 0.5 - 0.125);
  EXPECT_DOUBLE_EQ(f[1], -2.0 + 8.0);
  EXPECT_DOUBLE_EQ(f[2], 1.5 - 3.375);
  EXPECT_TRUE(p.diffusion_at(vec({1.0, 2.0, 3.0})).isIdentity());
  EXPECT_EQ(p.noise_dim, 3);
}

TEST(Cubic, RejectsZeroDimension) { EXPECT_THROW(make_cubic_gradient(0), InvalidArgument); }

TEST(Cubic, DensityRatio) {
  const SdeProblem p = make_cubic_gradient(2);
  const double r = (*p.invariant_density)(vec({0.0, 0.0})) / (*p.invariant_density)(vec({1.0, 0.0}));
  EXPECT_NEAR(r, std::exp(-0.5), 1e-15);
}

// Stationarity of dy = f dt + dW in 1D: (log rho)' = 2 f.
TEST(Cubic, DetailedBalance) {
  const SdeProblem p = make_cubic_gradient(1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  for (int i = 0; i < 200; ++i) {
    const double y = u(rng);
    // Analytic derivative of log(exp(y^2 - y^4/2)).
    const double dlog = 2.0 * y - 2.0 * y * y * y;
    const double h = 1e-5;
    const double fd = (std::log(p.marginal_density(0, y + h)) - std::log(p.marginal_density(0, y - h))) /
                      (2.0 * h);
    EXPECT_LT(std::abs(dlog - 2.0 * p.drift_at(vec({y}))[0]), 1e-10);
    EXPECT_NEAR(fd, dlog, 1e-6);
  }
}

TEST(Cubic, CoercivityHoldsOnSample) {
  for (int d : {1, 2, 3}) {
    const SdeProblem p = make_cubic_gradient(d);
    const CoercivityCheck c = check_coercivity(p, 10.0);
    EXPECT_EQ(c.samples, 10000u);
    EXPECT_EQ(c.violations, 0u) << "d = " << d;
    EXPECT_LE(c.worst_margin, 0.0);
  }
}

TEST(Cubic, DeclaredConstantsAreTight) {
  // Equality at y^2 = 1 in every component.
  const SdeProblem p = make_cubic_gradient(2);
  const Vector x = vec({1.0, -1.0});
  const double lhs = p.drift_at(x).dot(x);
  EXPECT_NEAR(lhs, p.coercivity->alpha - p.coercivity->beta * x.squaredNorm(), 1e-15);
}

TEST(Langevin, SpecValues) {
  const LangevinSpec s = default_langevin_spec();
  EXPECT_DOUBLE_EQ(s.noise_amplitude(0.0), 0.8);
  EXPECT_EQ(s.potential(1.0), 0.0);
  EXPECT_EQ(s.potential(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(s.potential(0.0), 0.25);
  EXPECT_EQ(s.potential_gradient(1.0), 0.0);
  EXPECT_DOUBLE_EQ(s.hamiltonian(0.0, 2.0), 2.25);
}

TEST(Langevin, FluctuationDissipation) {
  const LangevinSpec s = default_langevin_spec();
  for (double q = -5.0; q <= 5.0; q += 0.37) {
    const double a = s.noise_amplitude(q);
    EXPECT_NEAR(2.0 * s.damping(q), a * a, 1e-14);
    EXPECT_GT(s.damping(q), 0.0);
  }
}

TEST(Langevin, GradientMatchesPotential) {
  const LangevinSpec s = default_langevin_spec();
  for (double q = -2.0; q <= 2.0; q += 0.3) {
    const double h = 1e-6;
    EXPECT_NEAR(s.potential_gradient(q), (s.potential(q + h) - s.potential(q - h)) / (2 * h), 1e-7);
  }
}

TEST(Langevin, ProblemShape) {
  const SdeProblem p = make_langevin();
  EXPECT_EQ(p.dim, 2);
  EXPECT_EQ(p.noise_dim, 1);
  EXPECT_FALSE(p.coercivity.has_value());
  const Vector f = p.drift_at(vec({1.0, 0.0}));
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 0.0);
  const Matrix g = p.diffusion_at(vec({0.0, 3.0}));
  EXPECT_EQ(g(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g(1, 0), 0.8);
  EXPECT_DOUBLE_EQ((*p.invariant_density)(vec({1.0, 0.0})), 1.0);
}

// Stationary Fokker-Planck residual for rho = exp(-H), by finite differences:
//   -d_q(p rho) + d_p((delta p + Phi') rho) + 1/2 d_pp(Sigma^2 rho) = 0.
TEST(Langevin, StationaryFokkerPlanck) {
  const LangevinSpec s = default_langevin_spec();
  auto rho = [&](double q, double p) { return std::exp(-s.hamiltonian(q, p)); };
  const double h = 1e-4;
  for (double q = -1.8; q <= 1.8; q += 0.45) {
    for (double p = -2.0; p <= 2.0; p += 0.5) {
      auto flux_q = [&](double qq) { return p * rho(qq, p); };
      auto drift_p = [&](double pp) { return (s.damping(q) * pp + s.potential_gradient(q)) * rho(q, pp); };
      auto diff_p = [&](double pp) { return s.noise_amplitude(q) * s.noise_amplitude(q) * rho(q, pp); };
      const double r = -(flux_q(q + h) - flux_q(q - h)) / (2 * h) +
                       (drift_p(p + h) - drift_p(p - h)) / (2 * h) +
                       0.5 * (diff_p(p + h) - 2 * diff_p(p) + diff_p(p - h)) / (h * h);
      EXPECT_NEAR(r, 0.0, 1e-5) << "q=" << q << " p=" << p;
    }
  }
}

TEST(Jacobian, DeclaredValues) {
  const SdeProblem p = make_cubic_gradient(1);
  EXPECT_EQ(jacobian_eval(p, vec({0.0}))(0, 0), 1.0);
  EXPECT_EQ(jacobian_eval(p, vec({2.0}))(0, 0), -11.0);
}

TEST(Jacobian, FiniteDifferenceFallback) {
  SdeProblem p = make_cubic_gradient(2);
  p.jacobian.reset();
  const Matrix j = jacobian_eval(p, vec({2.0, 0.0}));
  EXPECT_NEAR(j(0, 0), -11.0, 1e-6);
  EXPECT_NEAR(j(1, 1), 1.0, 1e-6);
  EXPECT_NEAR(j(0, 1), 0.0, 1e-9);
}

TEST(Jacobian, LinearDriftIsExact) {
  SdeProblem p;
  p.dim = 2;
  p.noise_dim = 1;
  Matrix A(2, 2);
  A << -1.0, 2.0, 0.5, -3.0;
  p.drift = [A](const Vector& x, Vector& out) { out = A * x; };
  p.diffusion = [](const Vector&, Matrix& out) { out.setOnes(); };
  EXPECT_LT((jacobian_eval(p, vec({0.3, -4.0})) - A).norm(), 1e-8);
}

TEST(Problem, ValidateRejectsInconsistentShapes) {
  SdeProblem p;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = make_cubic_gradient(1);
  p.coercivity = Coercivity{-1.0, 1.0};
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Problem, DiffusionScale) {
  const SdeProblem p = with_diffusion_scale(make_cubic_gradient(2), 3.0);
  EXPECT_DOUBLE_EQ(p.diffusion_at(vec({0.0, 0.0}))(1, 1), 3.0);
  EXPECT_FALSE(p.invariant_density.has_value());
  EXPECT_TRUE(p.coercivity.has_value());
  const SdeProblem same = with_diffusion_scale(make_cubic_gradient(1), 1.0);
  EXPECT_TRUE(same.invariant_density.has_value());
}

TEST(Marginal, NormalizedCubic) {
  const auto rho = normalized_marginal(make_cubic_gradient(2), 1);
  EXPECT_NEAR(simpson(rho, -8.0, 8.0), 1.0, 1e-8);
  EXPECT_NEAR(rho(1.0) / rho(0.0), std::exp(0.5), 1e-12);
}

TEST(Marginal, LangevinMomentumIsStandardNormal) {
  const auto rho = normalized_marginal(make_langevin(), 1);
  EXPECT_NEAR(rho(0.0), 1.0 / std::sqrt(2.0 * M_PI), 1e-8);
}

TEST(Marginal, QuadratureFallbackAgreesWithClosedForm) {
  SdeProblem p = make_langevin();
  const auto closed = normalized_marginal(p, 0);
  p.marginal_density = nullptr;
  const auto quad = normalized_marginal(p, 0);
  for (double q : {-1.5, -0.3, 0.0, 1.0, 2.2}) EXPECT_NEAR(quad(q), closed(q), 1e-7);
}

TEST(Simpson, Polynomial) {
  EXPECT_NEAR(simpson([](double x) { return x * x * x - x; }, 0.0, 2.0), 2.0, 1e-12);
  EXPECT_NEAR(simpson([](double x) { return std::exp(-x * x); }, -8.0, 8.0), std::sqrt(M_PI), 1e-9);
}

}  // namespace
