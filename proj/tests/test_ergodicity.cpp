#include "adaptsde/ergodicity.hpp"
#include "adaptsde/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace adaptsde;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vector scalar(double v) { return Vector::Constant(1, v); }

SdeProblem ornstein_uhlenbeck() {
  SdeProblem p;
  p.name = "ou";
  p.dim = 1;
  p.noise_dim = 1;
  p.drift = [](const Vector& x, Vector& out) { out = -x; };
  p.diffusion = [](const Vector&, Matrix& out) { out.setOnes(); };
  p.coercivity = Coercivity{0.0, 1.0};
  return p;
}

double normal_pdf(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * kPi * var); }

TEST(Histogram, LocateAndRange) {
  Histogram h(-1.0, 1.0, 4);
  EXPECT_EQ(h.locate(-1.0), 0);
  EXPECT_EQ(h.locate(-0.5), 1);
  EXPECT_EQ(h.locate(0.999), 3);
  EXPECT_EQ(h.locate(1.0), -1);
  EXPECT_EQ(h.locate(-1.01), -1);
  EXPECT_EQ(h.locate(std::nan("")), -1);
  EXPECT_DOUBLE_EQ(h.center(0), -0.75);
  EXPECT_THROW(Histogram(0.0, 1.0, 0), InvalidArgument);
  EXPECT_THROW(Histogram(1.0, 1.0, 3), InvalidArgument);
}

TEST(Histogram, MassIncludesOutOfRange) {
  Histogram h(0.0, 1.0, 2);
  h.add(0.2, 1.0);
  h.add(0.7, 2.0);
  h.add(5.0, 1.0);
  EXPECT_DOUBLE_EQ(h.mass(0), 0.25);
  EXPECT_DOUBLE_EQ(h.mass(1), 0.5);
  EXPECT_DOUBLE_EQ(h.out_of_range_mass(), 0.25);
  EXPECT_DOUBLE_EQ(h.density(1), 1.0);
  EXPECT_EQ(h.records(), 3u);
  EXPECT_EQ(h.out_of_range_count(), 1u);
}

TEST(Histogram, MergeRequiresSameBinning) {
  Histogram a(0.0, 1.0, 2), b(0.0, 1.0, 2), c(0.0, 2.0, 2);
  a.add(0.1);
  b.add(0.9);
  a.merge(b);
  EXPECT_EQ(a.counts()[0], 1u);
  EXPECT_EQ(a.counts()[1], 1u);
  EXPECT_THROW(a.merge(c), BinMismatch);
  EXPECT_THROW(tv_distance(a, c), BinMismatch);
}

TEST(TvDistance, IdenticalAndDisjoint) {
  Histogram a(0.0, 1.0, 10), b(0.0, 1.0, 10);
  for (int i = 0; i < 10; ++i) a.add(0.05 + 0.1 * i);
  EXPECT_EQ(tv_distance(a, a), 0.0);
  b.add(7.0);
  EXPECT_DOUBLE_EQ(tv_distance(a, b), 2.0);
}

TEST(TvDistance, ExactBinMassesGiveZero) {
  Histogram h(-3.0, 3.0, 60);
  const auto rho = [](double x) { return normal_pdf(x, 1.0); };
  const auto p = bin_probabilities(h, rho);
  for (int i = 0; i < h.bins(); ++i) h.add(h.center(i), p[i]);
  h.add(10.0, p.back());
  EXPECT_LT(tv_distance(h, rho), 1e-6);
  // Unnormalized densities are normalized first.
  EXPECT_LT(tv_distance(h, [&](double x) { return 7.0 * rho(x); }), 1e-6);
}

TEST(TvDistance, SampledNormalConvergesAtMonteCarloRate) {
  NoiseStream s(17, 0);
  const auto rho = [](double x) { return normal_pdf(x, 1.0); };
  double prev = 2.0;
  for (int n : {10'000, 1'000'000}) {
    Histogram h(-4.0, 4.0, 40);
    for (int i = 0; i < n; ++i) h.add(s.next_gaussian());
    const double tv = tv_distance(h, rho);
    // Expected size is about sum_i sqrt(2 p_i / (pi n)) <= sqrt(2 * 41 / (pi n)).
    EXPECT_LT(tv, 2.0 * std::sqrt(2.0 * 41.0 / (kPi * n)));
    EXPECT_LT(tv, prev);
    prev = tv;
  }
}

TEST(BinProbabilities, SumToOne) {
  Histogram h(-1.0, 2.0, 7);
  const auto p = bin_probabilities(h, [](double x) { return normal_pdf(x, 2.0); });
  double total = 0.0;
  for (double v : p) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_GT(p.back(), 0.1);
}

TEST(StepHistogram, CountsAndShares) {
  StepHistogram s;
  s.add(3, 0.125);
  s.add(3, 0.125);
  s.add(5, 0.03125);
  EXPECT_EQ(s.total_count(), 3u);
  EXPECT_DOUBLE_EQ(s.total_time(), 0.28125);
  EXPECT_DOUBLE_EQ(s.time_share(3), 0.25 / 0.28125);
  EXPECT_EQ(s.time_share(9), 0.0);
  EXPECT_EQ(s.min_occupied(), 3);
  EXPECT_EQ(s.max_occupied(), 5);
  StepHistogram t;
  t.add(1, 1.0);
  s.merge(t);
  EXPECT_EQ(s.min_occupied(), 1);
  EXPECT_EQ(StepHistogram{}.min_occupied(), -1);
  EXPECT_THROW(s.add(-1, 0.1), InvalidArgument);
}

TEST(StepProfile, MeanLogDt) {
  StepProfile p(0, 0.0, 1.0, 2);
  p.add(0.25, 0.5);
  p.add(0.25, 0.125);
  EXPECT_DOUBLE_EQ(p.mean_log_dt(0), 0.5 * (std::log(0.5) + std::log(0.125)));
  EXPECT_TRUE(std::isnan(p.mean_log_dt(1)));
}

TEST(Prominence, PeakOverFlanks) {
  StepProfile p(0, -2.0, 2.0, 80);  // width 0.05
  for (int i = 0; i < 80; ++i) {
    const double c = p.log_dt_sum.center(i);
    const double d = std::abs(c - 1.0);
    p.add(c, std::exp(d <= 0.1 ? -1.0 : (c < 1.0 ? -3.0 : -2.5)));
  }
  EXPECT_NEAR(profile_prominence(p, 1.0, 0.1, 0.25), 1.5, 1e-12);
  // A point with no visits on one side has no prominence.
  StepProfile empty(0, 0.0, 1.0, 10);
  empty.add(0.55, 0.1);
  empty.add(0.35, 0.1);
  EXPECT_TRUE(std::isnan(profile_prominence(empty, 0.5, 0.1, 0.25)));
}

EnsembleConfig ou_ensemble(int threads) {
  EnsembleConfig e;
  e.paths = 200;
  e.horizon = 100.0;
  e.burn_in = 0.1;
  e.bins = 30;
  e.lo = {-3.0};
  e.hi = {3.0};
  e.x0 = scalar(0.0);
  e.seed = 23;
  e.threads = threads;
  e.profile_axis = 0;
  return e;
}

StepperConfig ou_stepper() {
  StepperConfig c;
  c.tol = 0.001;
  c.dt_max = 0.25;
  return c;
}

// The stationary law of dy = -y dt + dW is N(0, 1/2).
TEST(Ensemble, OrnsteinUhlenbeckOccupationMatchesGaussian) {
  const MethodPair pair = euler_pair(ornstein_uhlenbeck());
  const EnsembleResult r = run_ensemble(pair, ou_stepper(), ou_ensemble(1));
  ASSERT_EQ(r.marginals.size(), 1u);
  EXPECT_NEAR(r.marginals[0].total_weight(), 200 * 90.0, 1e-6);
  EXPECT_LT(tv_distance(r.marginals[0], [](double x) { return normal_pdf(x, 0.5); }), 0.04);
  EXPECT_NEAR(r.steps.total_time(), 200 * 90.0, 1e-6);
  EXPECT_GE(r.simulated_time, 200 * 100.0);
  EXPECT_FALSE(r.diverged);
  ASSERT_TRUE(r.profile.has_value());
  // Metric is dt |y|: larger steps near the origin.
  const int mid = r.profile->log_dt_sum.locate(0.05);
  const int edge = r.profile->log_dt_sum.locate(1.5);
  EXPECT_GT(r.profile->mean_log_dt(mid), r.profile->mean_log_dt(edge));
}

TEST(Ensemble, DeterministicAcrossThreadCounts) {
  const MethodPair pair = euler_pair(ornstein_uhlenbeck());
  EnsembleConfig one = ou_ensemble(1), four = ou_ensemble(4);
  one.paths = four.paths = 16;
  one.horizon = four.horizon = 10.0;
  const EnsembleResult a = run_ensemble(pair, ou_stepper(), one);
  const EnsembleResult b = run_ensemble(pair, ou_stepper(), four);
  EXPECT_EQ(a.marginals[0].weights(), b.marginals[0].weights());
  EXPECT_EQ(a.steps.counts, b.steps.counts);
  EXPECT_EQ(a.step_count, b.step_count);
}

TEST(Ensemble, PerStepWeightingCountsSteps) {
  const MethodPair pair = euler_pair(ornstein_uhlenbeck());
  EnsembleConfig e = ou_ensemble(1);
  e.paths = 4;
  e.horizon = 10.0;
  e.burn_in = 0.0;
  e.weighting = Weighting::PerStep;
  const EnsembleResult r = run_ensemble(pair, ou_stepper(), e);
  EXPECT_DOUBLE_EQ(r.marginals[0].total_weight(), static_cast<double>(r.step_count));
}

TEST(Ensemble, ConfigErrors) {
  const MethodPair pair = euler_pair(ornstein_uhlenbeck());
  EnsembleConfig e = ou_ensemble(1);
  e.burn_in = 1.0;
  EXPECT_THROW(run_ensemble(pair, ou_stepper(), e), InvalidArgument);
  e = ou_ensemble(1);
  e.axes = {1};
  EXPECT_THROW(run_ensemble(pair, ou_stepper(), e), InvalidArgument);
  e = ou_ensemble(1);
  e.x0 = Vector::Zero(2);
  EXPECT_THROW(run_ensemble(pair, ou_stepper(), e), InvalidArgument);
}

TEST(FixedEnsemble, CubicDivergesAtLargeStep) {
  const MethodPair pair = euler_pair(make_cubic_gradient(1));
  EnsembleConfig e = ou_ensemble(1);
  e.profile_axis.reset();
  e.paths = 4;
  e.horizon = 50.0;
  e.x0 = scalar(3.0);
  EXPECT_TRUE(run_fixed_ensemble(pair, 1.0, e).diverged);
  const EnsembleResult ok = run_fixed_ensemble(pair, 0.01, e);
  EXPECT_FALSE(ok.diverged);
  EXPECT_EQ(ok.step_count, 4u * 5000u);
  EXPECT_THROW(run_fixed_ensemble(pair, 0.0, e), InvalidArgument);
}

// Synthetic chains with y_{j+1} = a y_j + s z: E[y_{j+1}^2 | y_j] = a^2 y_j^2 + s^2.
TEST(Lyapunov, RecoversKnownRegression) {
  const double a = 0.6, s = 0.8;
  NoiseStream rng(31, 0);
  std::vector<ObservationChain> chains(10);
  for (auto& chain : chains) {
    double y = 0.0;
    for (int j = 0; j < 2001; ++j) {
      y = a * y + s * rng.next_gaussian();
      chain.entries.push_back(Observation{scalar(y), 0, 0.0, 0});
    }
  }
  StepperConfig c;
  c.tol = 0.05;
  const LyapunovReport r = foster_lyapunov_fit(chains, Coercivity{1.0, 1.0}, c, 1.0);
  EXPECT_EQ(r.samples, 20000u);
  EXPECT_NEAR(r.slope, a * a, 4.0 * r.slope_stderr);
  EXPECT_NEAR(r.intercept, s * s, 4.0 * r.intercept_stderr);
  EXPECT_LT(r.slope_stderr, 0.03);
  EXPECT_TRUE(r.contracts());
}

TEST(Lyapunov, DerivedConstants) {
  std::vector<ObservationChain> chains(1);
  for (int j = 0; j < 1001; ++j) chains[0].entries.push_back(Observation{scalar(j % 7), 0, 0.0, 0});
  StepperConfig c;
  c.tol = 0.2;
  c.dt_max = 0.5;
  c.obs_spacing = 3.0;
  const LyapunovReport r = foster_lyapunov_fit(chains, Coercivity{2.0, 1.0}, c, 4.0);
  EXPECT_DOUBLE_EQ(r.alpha_tilde, 2.1);
  EXPECT_DOUBLE_EQ(r.beta_tilde, 0.9);
  EXPECT_DOUBLE_EQ(r.gamma_minus, 1.0 / 1.9);
  EXPECT_DOUBLE_EQ(r.delta_plus, 3.5);
  EXPECT_NEAR(r.slope_bound, std::exp(-2.0 * 0.9 * 3.0 / 1.9), 1e-15);
  EXPECT_NEAR(r.intercept_bound, std::exp(2.0 * 0.9 * 3.5) * (4.2 + 4.0) * 3.5, 1e-9);
}

TEST(Lyapunov, Errors) {
  std::vector<ObservationChain> chains(1);
  for (int j = 0; j < 1000; ++j) chains[0].entries.push_back(Observation{scalar(j % 3), 0, 0.0, 0});
  StepperConfig c;
  c.tol = 0.05;
  EXPECT_THROW(foster_lyapunov_fit(chains, Coercivity{1.0, 1.0}, c, 1.0), InsufficientSamples);
  c.tol = 2.0;
  EXPECT_THROW(foster_lyapunov_fit(chains, Coercivity{1.0, 1.0}, c, 1.0), InvalidArgument);
}

TEST(NoiseBounds, IdentityAndScaled) {
  const NoiseBounds b = estimate_noise_bounds(make_cubic_gradient(2), 5.0, 100, 1.1);
  EXPECT_DOUBLE_EQ(b.sigma2, 2.2);
  EXPECT_DOUBLE_EQ(b.a, 2.0 * 2.0 / (2.2 * 2.2));
  const NoiseBounds s = estimate_noise_bounds(with_diffusion_scale(make_cubic_gradient(2), 2.0), 5.0,
                                              100, 1.0);
  EXPECT_DOUBLE_EQ(s.sigma2, 8.0);
  EXPECT_THROW(estimate_noise_bounds(make_cubic_gradient(1), 0.0), InvalidArgument);
}

TEST(Moment, ConstantFormula) {
  EXPECT_DOUBLE_EQ(moment_constant(Coercivity{2.0, 1.0}, 0.1, 3.0, 0.5), 2.0 * 2.05 + 4.0 * 9.0 * 0.5);
}

// Exponential excursions have P(E >= A) = exp(-lambda A).
TEST(Moment, TailFitRecoversExponentialRate) {
  const double lambda = 0.4;
  NoiseStream rng(41, 0);
  std::vector<double> ex(100'000);
  for (double& e : ex) e = -std::log(rng.next_uniform()) / lambda;
  const MomentReport r = exp_moment_tail(ex, {1.0, 2.0, 4.0, 8.0}, 1.0, NoiseBounds{1.0, 1.0});
  ASSERT_TRUE(r.fit_valid);
  EXPECT_NEAR(r.slope, -lambda, 4.0 * r.slope_stderr);
  EXPECT_NEAR(r.frequencies[0], std::exp(-lambda), 0.005);
  EXPECT_TRUE(r.frequencies_nonincreasing());
  EXPECT_TRUE(r.log_frequencies_strictly_decreasing());
}

TEST(Moment, TailFitNeedsHitsAtEveryLevel) {
  const MomentReport r = exp_moment_tail({0.5, 1.5, 3.0}, {1.0, 10.0}, 1.0, NoiseBounds{});
  EXPECT_FALSE(r.fit_valid);
  EXPECT_TRUE(std::isnan(r.slope));
  EXPECT_FALSE(r.log_frequencies_strictly_decreasing());
  EXPECT_TRUE(r.frequencies_nonincreasing());
  EXPECT_THROW(exp_moment_tail({}, {1.0}, 1.0, NoiseBounds{}), InsufficientSamples);
}

TEST(Moment, ExcursionsStartNonNegativeAndAreDeterministic) {
  const SdeProblem p = make_cubic_gradient(2);
  const MethodPair pair = euler_pair(p);
  StepperConfig c;
  c.tol = 0.05;
  const auto a = moment_excursions(pair, c, Vector::Zero(2), 2.0, 16, 3.0, 1, 1);
  const auto b = moment_excursions(pair, c, Vector::Zero(2), 2.0, 16, 3.0, 1, 4);
  EXPECT_EQ(a, b);
  for (double e : a) EXPECT_GE(e, 0.0);
}

TEST(Sweep, RowsAndDivergence) {
  SweepConfig sc;
  sc.taus = {0.25};
  sc.fixed_dts = {0.05, 0.4};
  sc.ensemble.paths = 20;
  sc.ensemble.horizon = 40.0;
  sc.ensemble.x0 = Vector::Zero(2);
  const auto rows = tv_sweep(make_langevin(), default_langevin_spec(), sc);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].method, "adaptive_euler");
  EXPECT_EQ(rows[1].method, "adaptive_symplectic");
  EXPECT_EQ(rows[2].method, "fixed_euler");
  EXPECT_EQ(rows[5].method, "fixed_symplectic");
  EXPECT_TRUE(std::isnan(rows[0].dt));
  EXPECT_TRUE(std::isnan(rows[2].tau));
  for (int i : {0, 1, 2, 4}) {
    EXPECT_FALSE(rows[i].diverged) << rows[i].method;
    EXPECT_GT(rows[i].tv_q, 0.0);
    EXPECT_LT(rows[i].tv_q, 1.0);
  }
  EXPECT_TRUE(rows[3].diverged);
  EXPECT_TRUE(std::isnan(rows[3].tv_q));
  std::ostringstream out;
  write_sweep_csv(out, rows);
  EXPECT_NE(out.str().find("diverged"), std::string::npos);
  EXPECT_THROW(tv_sweep(make_langevin(), default_langevin_spec(), SweepConfig{}), InvalidArgument);
}

}  // namespace
