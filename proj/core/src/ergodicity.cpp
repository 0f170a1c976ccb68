#include "adaptsde/ergodicity.hpp"

#include "adaptsde/csv.hpp"
#include "adaptsde/errors.hpp"
#include "adaptsde/parallel.hpp"

#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace adaptsde {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Histogram::Histogram(double lo, double hi, int bins)
    : lo_(lo), hi_(hi), weights_(bins, 0.0), counts_(bins, 0) {
  if (bins < 1) throw InvalidArgument("Histogram: bins must be >= 1");
  if (!(hi > lo)) throw InvalidArgument("Histogram: requires lo < hi");
}

int Histogram::locate(double value) const noexcept {
  if (!(value >= lo_) || !(value < hi_)) return -1;
  const int i = static_cast<int>((value - lo_) / width());
  return std::min(i, bins() - 1);
}

void Histogram::add(double value, double weight) {
  ++records_;
  total_weight_ += weight;
  const int i = locate(value);
  if (i < 0) {
    ++out_count_;
    out_weight_ += weight;
    return;
  }
  ++counts_[i];
  weights_[i] += weight;
}

void Histogram::merge(const Histogram& other) {
  if (other.bins() != bins() || other.lo_ != lo_ || other.hi_ != hi_) {
    throw BinMismatch("Histogram::merge: binning differs");
  }
  for (int i = 0; i < bins(); ++i) {
    weights_[i] += other.weights_[i];
    counts_[i] += other.counts_[i];
  }
  records_ += other.records_;
  out_count_ += other.out_count_;
  out_weight_ += other.out_weight_;
  total_weight_ += other.total_weight_;
}

double Histogram::mass(int i) const {
  return total_weight_ > 0.0 ? weights_.at(i) / total_weight_ : 0.0;
}

double Histogram::out_of_range_mass() const {
  return total_weight_ > 0.0 ? out_weight_ / total_weight_ : 0.0;
}

double Histogram::density(int i) const { return mass(i) / width(); }

double tv_distance(const Histogram& h, const Histogram& reference) {
  if (h.bins() != reference.bins() || h.lo() != reference.lo() || h.hi() != reference.hi()) {
    throw BinMismatch("tv_distance: binning differs");
  }
  double acc = std::abs(h.out_of_range_mass() - reference.out_of_range_mass());
  for (int i = 0; i < h.bins(); ++i) acc += std::abs(h.mass(i) - reference.mass(i));
  return acc;
}

std::vector<double> bin_probabilities(const Histogram& like,
                                      const std::function<double(double)>& density) {
  constexpr int kSub = 8;
  std::vector<double> p(like.bins() + 1, 0.0);
  const double w = like.width();
  double inside = 0.0;
  for (int i = 0; i < like.bins(); ++i) {
    const double left = like.lo() + i * w;
    double acc = 0.0;
    for (int s = 0; s < kSub; ++s) acc += density(left + (s + 0.5) * w / kSub);
    p[i] = acc * w / kSub;
    inside += p[i];
  }
  p.back() = std::max(0.0, 1.0 - inside);
  return p;
}

double tv_distance(const Histogram& h, const std::function<double(double)>& density) {
  // Normalize on a range wide enough to hold the mass of both benchmarks.
  const double lo = std::min(h.lo(), -8.0), hi = std::max(h.hi(), 8.0);
  const double z = simpson(density, lo, hi, 1e-10);
  const auto p = bin_probabilities(h, [&](double v) { return density(v) / z; });
  double acc = std::abs(h.out_of_range_mass() - p.back());
  for (int i = 0; i < h.bins(); ++i) acc += std::abs(h.mass(i) - p[i]);
  return acc;
}

void StepHistogram::add(int k, double dt) {
  if (k < 0) throw InvalidArgument("StepHistogram: negative k");
  if (static_cast<std::size_t>(k) >= counts.size()) {
    counts.resize(k + 1, 0);
    time.resize(k + 1, 0.0);
  }
  ++counts[k];
  time[k] += dt;
}

void StepHistogram::merge(const StepHistogram& other) {
  if (other.counts.size() > counts.size()) {
    counts.resize(other.counts.size(), 0);
    time.resize(other.counts.size(), 0.0);
  }
  for (std::size_t k = 0; k < other.counts.size(); ++k) {
    counts[k] += other.counts[k];
    time[k] += other.time[k];
  }
}

std::uint64_t StepHistogram::total_count() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

double StepHistogram::total_time() const {
  double t = 0.0;
  for (double v : time) t += v;
  return t;
}

double StepHistogram::time_share(int k) const {
  const double total = total_time();
  if (k < 0 || static_cast<std::size_t>(k) >= time.size() || total <= 0.0) return 0.0;
  return time[k] / total;
}

int StepHistogram::min_occupied() const {
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0) return static_cast<int>(k);
  }
  return -1;
}

int StepHistogram::max_occupied() const {
  for (std::size_t k = counts.size(); k > 0; --k) {
    if (counts[k - 1] > 0) return static_cast<int>(k - 1);
  }
  return -1;
}

StepProfile::StepProfile(int axis_, double lo, double hi, int bins)
    : axis(axis_), log_dt_sum(lo, hi, bins) {}

void StepProfile::add(double value, double dt) { log_dt_sum.add(value, std::log(dt)); }

double StepProfile::mean_log_dt(int i) const {
  const auto n = log_dt_sum.counts().at(i);
  return n == 0 ? kNaN : log_dt_sum.weights()[i] / static_cast<double>(n);
}

namespace {

void check_ensemble(const EnsembleConfig& c, int dim) {
  if (c.paths == 0) throw InvalidArgument("ensemble: paths must be positive");
  if (!(c.horizon >= 0.0)) throw InvalidArgument("ensemble: horizon must be >= 0");
  if (!(c.burn_in >= 0.0 && c.burn_in < 1.0)) {
    throw InvalidArgument("ensemble: burn_in must lie in [0, 1)");
  }
  if (c.axes.size() != c.lo.size() || c.axes.size() != c.hi.size()) {
    throw InvalidArgument("ensemble: axes, lo and hi must have equal length");
  }
  for (int a : c.axes) {
    if (a < 0 || a >= dim) throw InvalidArgument("ensemble: axis out of range");
  }
  if (c.profile_axis && (*c.profile_axis < 0 || *c.profile_axis >= dim)) {
    throw InvalidArgument("ensemble: profile axis out of range");
  }
  if (c.x0.size() != dim) throw InvalidArgument("ensemble: x0 has wrong dimension");
}

EnsembleResult empty_result(const EnsembleConfig& c, std::size_t profile_index) {
  EnsembleResult r;
  for (std::size_t a = 0; a < c.axes.size(); ++a) r.marginals.emplace_back(c.lo[a], c.hi[a], c.bins);
  if (c.profile_axis) {
    r.profile = StepProfile(*c.profile_axis, c.lo.at(profile_index), c.hi.at(profile_index),
                            c.bins);
  }
  return r;
}

std::size_t profile_range_index(const EnsembleConfig& c) {
  if (!c.profile_axis) return 0;
  for (std::size_t a = 0; a < c.axes.size(); ++a) {
    if (c.axes[a] == *c.profile_axis) return a;
  }
  throw InvalidArgument("ensemble: profile axis must also be a histogram axis");
}

// Accumulates the statistics of one step from x over [t, t + dt).
struct Recorder {
  const EnsembleConfig& c;
  EnsembleResult& r;
  double burn;

  void operator()(const Vector& x, double t, double dt, int k) {
    if (t >= c.horizon) return;
    const double lo = std::max(t, burn), hi = std::min(t + dt, c.horizon);
    double weight;
    if (c.weighting == Weighting::Occupation) {
      if (!(hi > lo)) return;
      weight = hi - lo;
    } else {
      if (t < burn) return;
      weight = 1.0;
    }
    for (std::size_t a = 0; a < c.axes.size(); ++a) r.marginals[a].add(x[c.axes[a]], weight);
    r.steps.add(k, hi - lo);
    if (r.profile) r.profile->add(x[r.profile->axis], dt);
  }
};

EnsembleResult merge_all(std::vector<EnsembleResult>& parts, const EnsembleConfig& c,
                         std::size_t profile_index) {
  EnsembleResult total = empty_result(c, profile_index);
  for (auto& part : parts) {
    for (std::size_t a = 0; a < total.marginals.size(); ++a) total.marginals[a].merge(part.marginals[a]);
    total.steps.merge(part.steps);
    if (total.profile) total.profile->merge(*part.profile);
    total.step_count += part.step_count;
    total.simulated_time += part.simulated_time;
    total.diverged = total.diverged || part.diverged;
  }
  return total;
}

}  // namespace

EnsembleResult run_ensemble(const MethodPair& pair, const StepperConfig& stepper,
                            const EnsembleConfig& config) {
  check_ensemble(config, pair.dim);
  const std::size_t pidx = profile_range_index(config);
  std::vector<EnsembleResult> parts(config.paths);
  const double burn = config.burn_in * config.horizon;
  parallel_for(config.paths, config.threads, [&](std::size_t i) {
    EnsembleResult& r = parts[i] = empty_result(config, pidx);
    if (config.horizon == 0.0) {
      for (std::size_t a = 0; a < config.axes.size(); ++a) r.marginals[a].add(config.x0[config.axes[a]]);
      return;
    }
    Recorder rec{config, r, burn};
    AdaptiveStepper engine(stepper, pair);
    NoiseStream stream(config.seed, i);
    ChainState state = ChainState::initial(config.x0, stepper);
    StepRecord record;
    Vector x_prev(pair.dim);
    while (state.t < config.horizon) {
      if (state.n >= stepper.max_steps) throw MaxStepsExceeded("run_ensemble: step limit");
      x_prev = state.x;
      const double t = state.t;
      engine.step(state, record, &stream);
      rec(x_prev, t, record.dt, record.k);
    }
    r.step_count = state.n;
    r.simulated_time = state.t;
  });
  return merge_all(parts, config, pidx);
}

EnsembleResult run_fixed_ensemble(const MethodPair& pair, double dt, const EnsembleConfig& config) {
  check_ensemble(config, pair.dim);
  if (!(dt > 0.0)) throw InvalidArgument("run_fixed_ensemble: dt must be > 0");
  const std::size_t pidx = profile_range_index(config);
  std::vector<EnsembleResult> parts(config.paths);
  const double burn = config.burn_in * config.horizon;
  const auto count = static_cast<std::uint64_t>(std::ceil(config.horizon / dt));
  parallel_for(config.paths, config.threads, [&](std::size_t i) {
    EnsembleResult& r = parts[i] = empty_result(config, pidx);
    Recorder rec{config, r, burn};
    NoiseStream stream(config.seed, i);
    Vector x = config.x0, F(pair.dim), Fbar(pair.dim), eta(pair.noise_dim), next(pair.dim);
    Matrix G(pair.dim, pair.noise_dim), Gbar(pair.dim, pair.noise_dim);
    const double root = std::sqrt(dt);
    for (std::uint64_t n = 0; n < count; ++n) {
      const double t = static_cast<double>(n) * dt;
      rec(x, t, dt, 0);
      pair.drifts(x, dt, F, Fbar);
      pair.diffusions(x, dt, G, Gbar);
      stream.fill_gaussian(eta);
      next.noalias() = G * eta;
      x += dt * F + root * next;
      ++r.step_count;
      if (!x.allFinite() || x.norm() > config.blowup) {
        r.diverged = true;
        break;
      }
    }
    r.simulated_time = static_cast<double>(r.step_count) * dt;
  });
  return merge_all(parts, config, pidx);
}

std::vector<Histogram> empirical_density(const MethodPair& pair, const StepperConfig& stepper,
                                         const EnsembleConfig& config) {
  return run_ensemble(pair, stepper, config).marginals;
}

double profile_prominence(const StepProfile& profile, double point, double window, double flank) {
  double peak = -std::numeric_limits<double>::infinity();
  double left = std::numeric_limits<double>::infinity();
  double right = left;
  const Histogram& h = profile.log_dt_sum;
  for (int i = 0; i < h.bins(); ++i) {
    const double v = profile.mean_log_dt(i);
    if (std::isnan(v)) continue;
    const double d = h.center(i) - point;
    if (std::abs(d) <= window) {
      peak = std::max(peak, v);
    } else if (d < 0 && -d <= flank) {
      left = std::min(left, v);
    } else if (d > 0 && d <= flank) {
      right = std::min(right, v);
    }
  }
  if (std::isinf(peak) || std::isinf(left) || std::isinf(right)) return kNaN;
  return peak - std::max(left, right);
}

LyapunovReport foster_lyapunov_fit(const std::vector<ObservationChain>& chains,
                                   const Coercivity& coercivity, const StepperConfig& config,
                                   double sigma2) {
  if (!(config.tol < 2.0 * coercivity.beta)) {
    throw InvalidArgument("foster_lyapunov_fit: requires tau < 2 beta");
  }
  LyapunovReport r;
  r.alpha_tilde = coercivity.alpha + 0.5 * config.tol;
  r.beta_tilde = coercivity.beta - 0.5 * config.tol;
  r.gamma_bar = 1.0 + r.beta_tilde * config.dt_max;
  r.gamma_minus = 1.0 / (1.0 + 2.0 * r.beta_tilde * config.dt_max);
  r.delta_minus = config.obs_spacing;
  r.delta_plus = config.obs_spacing + config.dt_max;
  r.slope_bound = std::exp(-2.0 * r.gamma_minus * r.beta_tilde * r.delta_minus);
  r.intercept_bound = std::exp(2.0 * r.beta_tilde * r.delta_plus) *
                      (2.0 * r.alpha_tilde + sigma2) * r.delta_plus;

  std::vector<double> xs, ys;
  for (const auto& chain : chains) {
    for (std::size_t j = 0; j + 1 < chain.entries.size(); ++j) {
      xs.push_back(chain.entries[j].y.squaredNorm());
      ys.push_back(chain.entries[j + 1].y.squaredNorm());
    }
  }
  r.samples = xs.size();
  if (r.samples < 1000) {
    throw InsufficientSamples("foster_lyapunov_fit: need at least 1000 transitions, got " +
                              std::to_string(r.samples));
  }
  const double n = static_cast<double>(r.samples);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientSamples("foster_lyapunov_fit: |y_j|^2 has no spread");
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  // Heteroskedasticity-robust (HC1) standard errors; the conditional
  // variance of |y_{j+1}|^2 grows with |y_j|^2.
  double meat_ss = 0.0, meat_s = 0.0, meat_1 = 0.0;
  double sx = 0.0, sxx_raw = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - r.intercept - r.slope * xs[i];
    meat_1 += e * e;
    meat_s += e * e * xs[i];
    meat_ss += e * e * xs[i] * xs[i];
    sx += xs[i];
    sxx_raw += xs[i] * xs[i];
  }
  // (X'X)^{-1} for X = [1, x].
  const double det = n * sxx_raw - sx * sx;
  const double i00 = sxx_raw / det, i01 = -sx / det, i11 = n / det;
  const double v11 = i01 * i01 * meat_1 + 2.0 * i01 * i11 * meat_s + i11 * i11 * meat_ss;
  const double v00 = i00 * i00 * meat_1 + 2.0 * i00 * i01 * meat_s + i01 * i01 * meat_ss;
  const double dof = n / (n - 2.0);
  r.slope_stderr = std::sqrt(dof * v11);
  r.intercept_stderr = std::sqrt(dof * v00);
  return r;
}

NoiseBounds estimate_noise_bounds(const SdeProblem& problem, double radius, std::size_t samples,
                                  double inflation) {
  if (!(radius > 0.0) || samples == 0) {
    throw InvalidArgument("estimate_noise_bounds: radius and samples must be positive");
  }
  boost::random::sobol qrng(static_cast<std::size_t>(problem.dim));
  boost::random::uniform_01<double> unit;
  Vector x(problem.dim);
  Matrix g(problem.dim, problem.noise_dim);
  double tr_max = 0.0, tr2_max = 0.0;
  for (std::size_t s = 0; s < samples;) {
    for (int i = 0; i < problem.dim; ++i) x[i] = radius * (2.0 * unit(qrng) - 1.0);
    if (x.norm() > radius) continue;
    problem.diffusion(x, g);
    const Matrix cov = g * g.transpose();
    tr_max = std::max(tr_max, cov.trace());
    tr2_max = std::max(tr2_max, (cov * cov).trace());
    ++s;
  }
  NoiseBounds b;
  b.sigma2 = inflation * tr_max;
  b.a = b.sigma2 > 0.0 ? 2.0 * tr2_max / (b.sigma2 * b.sigma2) : 0.0;
  return b;
}

double moment_constant(const Coercivity& coercivity, double tau, double sigma2, double dt_max) {
  return 2.0 * (coercivity.alpha + 0.5 * tau) + 4.0 * sigma2 * sigma2 * dt_max;
}

bool MomentReport::frequencies_nonincreasing() const {
  for (std::size_t i = 1; i < frequencies.size(); ++i) {
    if (frequencies[i] > frequencies[i - 1]) return false;
  }
  return true;
}

bool MomentReport::log_frequencies_strictly_decreasing() const {
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (!(frequencies[i] > 0.0)) return false;
    if (i > 0 && !(frequencies[i] < frequencies[i - 1])) return false;
  }
  return true;
}

std::vector<double> moment_excursions(const MethodPair& pair, const StepperConfig& stepper,
                                      const Vector& x0, double horizon, std::size_t paths,
                                      double C0, std::uint64_t seed, int threads) {
  if (!(horizon > 0.0) || paths == 0) {
    throw InvalidArgument("moment_excursions: horizon and paths must be positive");
  }
  std::vector<double> out(paths, 0.0);
  const double start = x0.squaredNorm();
  parallel_for(paths, threads, [&](std::size_t i) {
    AdaptiveStepper engine(stepper, pair);
    NoiseStream stream(seed, i);
    ChainState state = ChainState::initial(x0, stepper);
    StepRecord record;
    double sup = 0.0;  // n = 0 term
    while (state.t < horizon) {
      if (state.n >= stepper.max_steps) throw MaxStepsExceeded("moment_excursions: step limit");
      engine.step(state, record, &stream);
      if (state.t <= horizon) sup = std::max(sup, state.x.squaredNorm() - C0 * state.t - start);
    }
    out[i] = sup;
  });
  return out;
}

MomentReport exp_moment_tail(const std::vector<double>& excursions,
                             const std::vector<double>& levels, double C0,
                             const NoiseBounds& bounds) {
  if (excursions.empty() || levels.empty()) {
    throw InsufficientSamples("exp_moment_tail: no excursions or no levels");
  }
  MomentReport r;
  r.C0 = C0;
  r.sigma2 = bounds.sigma2;
  r.a = bounds.a;
  r.paths = excursions.size();
  r.levels = levels;
  const double P = static_cast<double>(r.paths);
  for (double A : levels) {
    std::uint64_t hits = 0;
    for (double e : excursions) hits += e >= A ? 1 : 0;
    r.exceedances.push_back(hits);
    r.frequencies.push_back(static_cast<double>(hits) / P);
  }
  r.fit_valid = levels.size() >= 2 &&
                std::all_of(r.exceedances.begin(), r.exceedances.end(),
                            [&](std::uint64_t h) { return h > 0 && h < r.paths; });
  if (!r.fit_valid) {
    r.slope = r.intercept = r.slope_stderr = kNaN;
    return r;
  }
  // Weighted least squares of log p on A; Var(log p_hat) ~ (1 - p) / (P p).
  double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double p = r.frequencies[i];
    const double w = P * p / (1.0 - p);
    const double x = levels[i], y = std::log(p);
    sw += w;
    swx += w * x;
    swy += w * y;
    swxx += w * x * x;
    swxy += w * x * y;
  }
  const double det = sw * swxx - swx * swx;
  r.slope = (sw * swxy - swx * swy) / det;
  r.intercept = (swxx * swy - swx * swxy) / det;
  r.slope_stderr = std::sqrt(sw / det);
  return r;
}

std::vector<SweepRow> tv_sweep(const SdeProblem& problem, const LangevinSpec& spec,
                               const SweepConfig& config) {
  if (config.taus.empty() && config.fixed_dts.empty()) {
    throw InvalidArgument("tv_sweep: nothing to run");
  }
  const MethodPair euler = euler_pair(problem);
  const MethodPair symplectic = symplectic_pair(spec);
  const auto rho_q = normalized_marginal(problem, 0);
  const auto rho_p = normalized_marginal(problem, 1);

  EnsembleConfig ec = config.ensemble;
  ec.axes = {0, 1};
  ec.lo = {-3.0, -4.0};
  ec.hi = {3.0, 4.0};
  ec.profile_axis.reset();

  std::vector<SweepRow> rows;
  auto finish = [&](SweepRow row, const EnsembleResult& r) {
    row.diverged = r.diverged;
    row.steps_per_unit_time = r.steps_per_unit_time();
    if (r.diverged) {
      row.tv_q = row.tv_p = kNaN;
    } else {
      row.tv_q = tv_distance(r.marginals[0], rho_q);
      row.tv_p = tv_distance(r.marginals[1], rho_p);
    }
    rows.push_back(row);
  };
  for (const auto* pair : {&euler, &symplectic}) {
    const std::string name = pair == &euler ? "adaptive_euler" : "adaptive_symplectic";
    for (double tau : config.taus) {
      StepperConfig sc = config.stepper;
      sc.tol = tau;
      SweepRow row{name, tau, kNaN};
      EnsembleResult r;
      try {
        r = run_ensemble(*pair, sc, ec);
      } catch (const NonFinite&) {
        r.diverged = true;
      }
      finish(row, r);
    }
  }
  for (const auto* pair : {&euler, &symplectic}) {
    const std::string name = pair == &euler ? "fixed_euler" : "fixed_symplectic";
    for (double dt : config.fixed_dts) finish(SweepRow{name, kNaN, dt}, run_fixed_ensemble(*pair, dt, ec));
  }
  return rows;
}

void write_density_csv(std::ostream& out, const Histogram& h,
                       const std::function<double(double)>& analytic) {
  csv::Writer w(out);
  w.header({"bin_center", "density", "analytic_density", "count"});
  std::vector<double> p;
  if (analytic) p = bin_probabilities(h, analytic);
  for (int i = 0; i < h.bins(); ++i) {
    w.cell(h.center(i)).cell(h.density(i)).cell(analytic ? p[i] / h.width() : kNaN);
    w.cell(static_cast<unsigned long long>(h.counts()[i]));
    w.end_row();
  }
}

void write_profile_csv(std::ostream& out, const StepProfile& profile) {
  csv::Writer w(out);
  w.header({"bin_center", "mean_log_dt", "visits"});
  const Histogram& h = profile.log_dt_sum;
  for (int i = 0; i < h.bins(); ++i) {
    w.cell(h.center(i)).cell(profile.mean_log_dt(i));
    w.cell(static_cast<unsigned long long>(h.counts()[i]));
    w.end_row();
  }
}

void write_step_histogram_csv(std::ostream& out, const StepHistogram& steps) {
  csv::Writer w(out);
  w.header({"k", "count", "time", "time_share"});
  for (std::size_t k = 0; k < steps.counts.size(); ++k) {
    w.cell(k).cell(static_cast<unsigned long long>(steps.counts[k])).cell(steps.time[k]);
    w.cell(steps.time_share(static_cast<int>(k)));
    w.end_row();
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  csv::Writer w(out);
  w.header({"pair", "tau", "dt", "tv_q", "tv_p", "steps_per_unit_time", "status"});
  for (const auto& row : rows) {
    w.cell(std::string_view(row.method)).cell(row.tau).cell(row.dt).cell(row.tv_q).cell(row.tv_p);
    w.cell(row.steps_per_unit_time).cell(std::string_view(row.diverged ? "diverged" : "ok"));
    w.end_row();
  }
}

}  // namespace adaptsde
