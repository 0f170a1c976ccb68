#pragma once

#include "adaptsde/method_pair.hpp"
#include "adaptsde/problem.hpp"
#include "adaptsde/stepper.hpp"
#include "adaptsde/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace adaptsde {

/// Weighted 1D histogram on [lo, hi) with out-of-range mass kept aside.
class Histogram {
 public:
  Histogram() = default;
  Histogram(double lo, double hi, int bins);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  int bins() const noexcept { return static_cast<int>(weights_.size()); }
  double width() const noexcept { return (hi_ - lo_) / bins(); }
  double center(int i) const noexcept { return lo_ + (i + 0.5) * width(); }
  /// Bin index of `value`, or -1 outside [lo, hi).
  int locate(double value) const noexcept;

  void add(double value, double weight = 1.0);
  /// Adds `other` bin by bin. Throws BinMismatch on different binning.
  void merge(const Histogram& other);

  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t records() const noexcept { return records_; }
  std::uint64_t out_of_range_count() const noexcept { return out_count_; }
  double out_of_range_weight() const noexcept { return out_weight_; }
  double total_weight() const noexcept { return total_weight_; }

  /// Probability of bin i (weight over total weight, out-of-range included).
  double mass(int i) const;
  double out_of_range_mass() const;
  /// mass(i) / width.
  double density(int i) const;

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<double> weights_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t records_ = 0;
  std::uint64_t out_count_ = 0;
  double out_weight_ = 0.0;
  double total_weight_ = 0.0;
};

/// L1 distance between the bin probabilities of two distributions on the
/// same binning, out-of-range mass counted as one extra cell. Ranges over
/// [0, 2].
double tv_distance(const Histogram& h, const Histogram& reference);
/// Reference given by a (not necessarily normalized) density on the line:
/// normalized by quadrature, integrated per bin with an 8-point midpoint rule.
double tv_distance(const Histogram& h, const std::function<double(double)>& density);

/// Per-bin probabilities of `density` on the binning of `like`; the last entry
/// is the mass outside [lo, hi). `density` must already be normalized.
std::vector<double> bin_probabilities(const Histogram& like,
                                      const std::function<double(double)>& density);

/// Counts of k_n and the time spent at each k.
struct StepHistogram {
  std::vector<std::uint64_t> counts;
  std::vector<double> time;

  void add(int k, double dt);
  void merge(const StepHistogram& other);
  std::uint64_t total_count() const;
  double total_time() const;
  /// Fraction of time spent at k.
  double time_share(int k) const;
  /// Smallest k with nonzero count, or -1.
  int min_occupied() const;
  int max_occupied() const;
};

/// Mean of log dt per spatial bin of one coordinate.
struct StepProfile {
  int axis = 0;
  Histogram log_dt_sum;  // weights = sum of log dt, counts = visits

  StepProfile() = default;
  StepProfile(int axis, double lo, double hi, int bins);
  void add(double value, double dt);
  void merge(const StepProfile& other) { log_dt_sum.merge(other.log_dt_sum); }
  /// NaN for bins without visits.
  double mean_log_dt(int i) const;
};

enum class Weighting { Occupation, PerStep };

struct EnsembleConfig {
  std::size_t paths = 200;
  double horizon = 200.0;
  double burn_in = 0.1;  // fraction of the horizon discarded
  Weighting weighting = Weighting::Occupation;
  std::vector<int> axes = {0};
  /// Range and bins per entry of `axes`.
  std::vector<double> lo = {-3.0};
  std::vector<double> hi = {3.0};
  int bins = 120;
  std::optional<int> profile_axis;  // collect a StepProfile on this coordinate
  Vector x0;
  std::uint64_t seed = 1;
  int threads = 1;
  /// |x| above this counts as divergence for fixed-step baselines.
  double blowup = 1e8;
};

struct EnsembleResult {
  std::vector<Histogram> marginals;  // one per axis
  StepHistogram steps;
  std::optional<StepProfile> profile;
  std::uint64_t step_count = 0;
  double simulated_time = 0.0;
  bool diverged = false;

  double steps_per_unit_time() const {
    return simulated_time > 0.0 ? static_cast<double>(step_count) / simulated_time : 0.0;
  }
};

/// Ensemble of adaptive paths with occupation statistics collected after
/// the burn-in. Paths use streams (seed, path index).
EnsembleResult run_ensemble(const MethodPair& pair, const StepperConfig& stepper,
                            const EnsembleConfig& config);

/// Same statistics for the primary leg of `pair` at a fixed step. Reports
/// divergence instead of throwing.
EnsembleResult run_fixed_ensemble(const MethodPair& pair, double dt, const EnsembleConfig& config);

/// Time-and-ensemble occupation histogram of the selected coordinates.
std::vector<Histogram> empirical_density(const MethodPair& pair, const StepperConfig& stepper,
                                         const EnsembleConfig& config);

/// Prominence of the mean-log-dt profile around `point`: the highest bin
/// mean within `window` of the point minus the larger of the two lowest bin
/// means in the flanks window < |c - point| <= flank. NaN if a flank is empty.
double profile_prominence(const StepProfile& profile, double point, double window, double flank);

struct LyapunovReport {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  std::size_t samples = 0;
  double alpha_tilde = 0.0;
  double beta_tilde = 0.0;
  double gamma_bar = 0.0;
  double gamma_minus = 0.0;
  double delta_minus = 0.0;
  double delta_plus = 0.0;
  double slope_bound = 0.0;  // exp(-2 gamma_minus beta_tilde delta_minus)
  /// exp(2 beta_tilde delta_plus) (2 alpha_tilde + sigma^2) delta_plus
  double intercept_bound = 0.0;

  /// slope + z * stderr < 1.
  bool contracts(double z = 3.0) const { return slope + z * slope_stderr < 1.0; }
};

/// Pooled least-squares fit of |y_{j+1}|^2 on |y_j|^2. `sigma2` bounds
/// E|Sigma(x) eta|^2. Throws InsufficientSamples below 1000 transitions and
/// InvalidArgument unless tau < 2 beta.
LyapunovReport foster_lyapunov_fit(const std::vector<ObservationChain>& chains,
                                   const Coercivity& coercivity, const StepperConfig& config,
                                   double sigma2);

struct NoiseBounds {
  double sigma2 = 0.0;  // inflated sup of trace(Sigma Sigma^T)
  double a = 0.0;       // sup of 2 trace((Sigma Sigma^T)^2) / sigma^4
};

/// Sup over a Sobol sample of B(0, radius), sigma^2 inflated by `inflation`.
NoiseBounds estimate_noise_bounds(const SdeProblem& problem, double radius,
                                  std::size_t samples = 10000, double inflation = 1.1);

/// C0 = 2 alpha_tilde + 4 sigma^4 dt_max.
double moment_constant(const Coercivity& coercivity, double tau, double sigma2, double dt_max);

struct MomentReport {
  double C0 = 0.0;
  double sigma2 = 0.0;
  double a = 0.0;
  std::size_t paths = 0;
  std::vector<double> levels;
  std::vector<std::uint64_t> exceedances;
  std::vector<double> frequencies;
  double slope = 0.0;  // of log frequency against A
  double intercept = 0.0;
  double slope_stderr = 0.0;
  bool fit_valid = false;  // false if some level had no exceedance

  bool frequencies_nonincreasing() const;
  bool log_frequencies_strictly_decreasing() const;
};

/// Per path, sup_n (|x_n|^2 - C0 t_n) - |x_0|^2 over t_n <= horizon.
std::vector<double> moment_excursions(const MethodPair& pair, const StepperConfig& stepper,
                                      const Vector& x0, double horizon, std::size_t paths,
                                      double C0, std::uint64_t seed, int threads);

/// Exceedance frequencies of the excursions at each level and a weighted
/// least-squares fit of their logarithms against the level.
MomentReport exp_moment_tail(const std::vector<double>& excursions,
                             const std::vector<double>& levels, double C0,
                             const NoiseBounds& bounds);

struct SweepRow {
  std::string method;  // adaptive_euler, adaptive_symplectic, fixed_euler, fixed_symplectic
  double tau = 0.0;    // NaN for fixed-step rows
  double dt = 0.0;     // NaN for adaptive rows
  double tv_q = 0.0;
  double tv_p = 0.0;
  double steps_per_unit_time = 0.0;
  bool diverged = false;
};

struct SweepConfig {
  std::vector<double> taus;
  std::vector<double> fixed_dts;
  EnsembleConfig ensemble;  // axes/ranges are set by the sweep
  StepperConfig stepper;
};

/// TV error of the q and p marginals of the Langevin system for the
/// adaptive Euler and symplectic pairs over `taus`, plus fixed-step
/// baselines of both primary legs.
std::vector<SweepRow> tv_sweep(const SdeProblem& problem, const LangevinSpec& spec,
                               const SweepConfig& config);

void write_density_csv(std::ostream& out, const Histogram& h,
                       const std::function<double(double)>& analytic);
void write_profile_csv(std::ostream& out, const StepProfile& profile);
void write_step_histogram_csv(std::ostream& out, const StepHistogram& steps);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace adaptsde
