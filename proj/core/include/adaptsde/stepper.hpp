#pragma once

#include "adaptsde/method_pair.hpp"
#include "adaptsde/noise.hpp"
#include "adaptsde/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace adaptsde {

enum class ControllerKind { DriftMean, MeanStdDev, RelEntropy, RelEntropyAsymptotic };

std::string_view to_string(ControllerKind kind);
ControllerKind controller_from_string(std::string_view name);

/// Error metric comparing the two legs of a MethodPair for one step.
struct ErrorController {
  ControllerKind kind = ControllerKind::DriftMean;

  /// Acceptance threshold: tol for the mean-based metrics, 2 tol for the
  /// entropy metrics.
  double threshold(double tol) const;
};

struct StepperConfig {
  double tol = 0.05;
  double dt_max = 1.0;
  int k_init = 10;  // k_{-1}
  int k_cap = 60;
  ErrorController controller{};
  double obs_spacing = 6.0;  // delta
  std::uint64_t max_steps = 1'000'000'000;

  double dt_of(int k) const { return std::ldexp(dt_max, -k); }
  /// Throws InvalidArgument. `ergodic` additionally requires delta > 5 dt_max.
  void validate(bool ergodic = false) const;
};

/// State of the Markov chain (x_n, k_{n-1}) plus the clock t_n.
struct ChainState {
  Vector x;
  int k_prev = 0;
  double t = 0.0;
  double t_carry = 0.0;  // Kahan compensation for t
  std::uint64_t n = 0;

  static ChainState initial(const Vector& x0, const StepperConfig& config);
};

struct StepRecord {
  int k = 0;
  double dt = 0.0;
  Vector x_star;
  Vector eta;
  double metric = 0.0;
};

/// Forces eta = 0 (deterministic drift-only steps).
struct ZeroNoise {};

/// Noise source of a step: fresh normals (ensemble mode), normalized
/// increments of a shared Brownian path (coupled mode), or none.
using NoiseRef = std::variant<ZeroNoise, NoiseStream*, BrownianPath*>;

double metric(const ErrorController& controller, const MethodPair& pair, const Vector& x,
              double dt);

/// Least k >= max(l - 1, 0) whose step passes the error control, scanning
/// upward. Throws StepUnderflow when no k <= k_cap passes.
int select_k(const StepperConfig& config, const MethodPair& pair, const Vector& x, int l);

/// Smallest k such that every l in [k, k_cap] passes the error control.
int k_star(const StepperConfig& config, const MethodPair& pair, const Vector& x);

/// Reusable stepping engine. Holds scratch buffers, so one instance must not
/// be shared between threads.
class AdaptiveStepper {
 public:
  AdaptiveStepper(const StepperConfig& config, const MethodPair& pair);

  const StepperConfig& config() const noexcept { return config_; }
  const MethodPair& pair() const noexcept { return pair_; }

  double metric(const Vector& x, double dt);
  int select_k(const Vector& x, int l);

  /// Advances `state` by one step and fills `record`.
  void step(ChainState& state, StepRecord& record, NoiseRef noise);

  /// Drift and diffusion used for the accepted step, valid after step().
  const Vector& last_drift() const noexcept { return F_; }
  const Matrix& last_diffusion() const noexcept { return G_; }

 private:
  StepperConfig config_;
  const MethodPair& pair_;
  double threshold_;
  double last_metric_ = 0.0;
  std::vector<double> dt_table_;  // dt_of(k) for k = 0..k_cap
  Vector F_, Fbar_, next_, increment_;
  Matrix G_, Gbar_;
};

std::pair<ChainState, StepRecord> step_once(const ChainState& state, const StepperConfig& config,
                                            const MethodPair& pair, NoiseRef noise);

/// Called after every step with x_n, t_n, the step record and x_{n+1}.
struct StepEvent {
  std::uint64_t n;
  double t;
  const Vector& x;
  const StepRecord& record;
  const Vector& x_next;
};
using StepObserver = std::function<void(const StepEvent&)>;

/// Result of run_path. With full detail, states[i] / times[i] hold x_i / t_i
/// for i = 0..N and steps[i] the record of step i.
struct Trajectory {
  MethodPair pair;
  BrownianPath* path = nullptr;  // non-owning; set in coupled mode
  double horizon = 0.0;
  bool detailed = false;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<StepRecord> steps;
  std::uint64_t step_count = 0;
  double final_time = 0.0;  // t_N >= horizon
  Vector final_state;       // x_N
  Vector state_at_horizon;  // interpolant at exactly `horizon`
};

/// Steps until t_n >= horizon.
Trajectory run_path(const Vector& x0, const StepperConfig& config, const MethodPair& pair,
                    NoiseRef noise, double horizon, bool detailed = true,
                    const StepObserver& observer = {});

enum class InterpolantKind { PiecewiseConstant, Continuous };

/// X(t) = x_n on [t_n, t_{n+1}), or the continuous interpolant
///   x_n + (t - t_n) F(x_n, dt_n) + G(x_n, dt_n) [W(t) - W(t_n)].
/// The continuous kind needs a detailed coupled trajectory.
Vector interpolate(const Trajectory& trajectory, double t, InterpolantKind kind);

struct Observation {
  Vector y;          // x_{N_j + 1}
  int l = 0;         // k_{N_j}
  double t = 0.0;    // t_{N_j}
  std::uint64_t index = 0;  // N_j
};

struct ObservationChain {
  double spacing = 0.0;
  std::vector<Observation> entries;  // j = 1..J
};

/// Records the chain at the stopping times N_j = inf{n : t_n >= delta + t_{N_{j-1}}}.
ObservationChain observe(const Vector& x0, const StepperConfig& config, const MethodPair& pair,
                         NoiseRef noise, std::size_t count);

/// Trajectory CSV: n, t, k, dt, metric, x_1..x_m (x is x_n, the state the
/// step starts from).
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace adaptsde
