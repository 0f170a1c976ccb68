#pragma once

#include "adaptsde/method_pair.hpp"
#include "adaptsde/problem.hpp"
#include "adaptsde/stepper.hpp"
#include "adaptsde/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace adaptsde {

/// F1(u) = df(u) f(u).
Vector F1(const SdeProblem& problem, const Vector& u);

/// E(u, h) = f(u + h f(u)) - f(u).
Vector local_error(const SdeProblem& problem, const Vector& u, double h);

/// Second-order coefficient of E(u, h) = h F1(u) + h^2 F2(u, h).
Vector F2(const SdeProblem& problem, const Vector& u, double h);

/// Curvature bound K_R and the derived step/tolerance limits on B_R.
struct DriftDiagnostics {
  const SdeProblem* problem = nullptr;
  double radius = 0.0;
  double epsilon = 0.0;
  double dt_max = 0.0;
  double K_R_sampled = 0.0;  // max |F2| over the mesh
  double K_R = 0.0;          // inflated value used by the checks
  std::size_t samples = 0;

  /// |F1(u)| <= epsilon.
  bool in_bad_set(const Vector& u) const;
  /// u in B_R minus the bad set.
  bool in_good_region(const Vector& u) const;

  double h_bar() const { return epsilon / (6.0 * K_R); }
  double tau_limit() const { return epsilon * epsilon / (12.0 * K_R); }
  bool degenerate() const;
};

/// Samples |F2| on a Sobol mesh of B_R x (0, dt_max] and inflates the
/// maximum by `inflation`.
DriftDiagnostics estimate_diagnostics(const SdeProblem& problem, double radius, double epsilon,
                                      double dt_max, std::size_t samples = 10000,
                                      double inflation = 1.2);

struct LemmaViolation {
  std::uint64_t path = 0;
  std::uint64_t n = 0;
  double dt = 0.0;
  double bound = 0.0;
};

enum class LemmaStatus { Checked, HypothesisViolated, DegenerateCurvature };
std::string_view to_string(LemmaStatus status);

/// Outcome of the timestep upper-bound check.
///
/// Each maximal run of steps with x_n in B_{R,eps} is one segment. A segment
/// is covered by the bound only when the step taken just before it (or
/// dt_{-1} at the start of a path) is below 2 tau / eps, which is the
/// bound's own initial-step hypothesis restated for the segment. Segments
/// entered with a larger step are counted in `segments_unconditioned` and
/// their steps are tallied separately.
struct LemmaReport {
  LemmaStatus status = LemmaStatus::Checked;
  std::string note;
  double K_R = 0.0;
  double tau = 0.0;
  double tau_limit = 0.0;
  double step_bound = 0.0;  // min(h_bar, 2 tau / eps)
  std::uint64_t paths = 0;
  std::uint64_t steps_total = 0;
  std::uint64_t steps_checked = 0;
  std::uint64_t segments = 0;
  std::uint64_t segments_unconditioned = 0;
  std::uint64_t steps_unconditioned = 0;
  std::uint64_t unconditioned_over_bound = 0;
  double max_ratio = 0.0;  // largest dt / step_bound over checked steps
  std::uint64_t violation_count = 0;
  std::vector<LemmaViolation> violations;  // first few, for diagnostics

  bool passed() const { return status != LemmaStatus::Checked || violation_count == 0; }
  void merge(const LemmaReport& other);
};

/// Streaming form of the check, fed one step at a time so that long runs do
/// not have to keep their trajectories.
class LemmaBoundChecker {
 public:
  LemmaBoundChecker(const DriftDiagnostics& diagnostics, double tau, double dt_init);

  void begin_path(std::uint64_t path_id);
  /// x is the state the step starts from.
  void on_step(std::uint64_t n, const Vector& x, double dt);
  const LemmaReport& report() const noexcept { return report_; }

 private:
  const DriftDiagnostics& diag_;
  double dt_init_;
  double two_tau_over_eps_;
  LemmaReport report_;
  std::uint64_t path_ = 0;
  double dt_prev_ = 0.0;
  bool inside_ = false;
  bool conditioned_ = false;
  Vector f_, fx_;
  Matrix jac_;
};

LemmaReport timestep_bound_check(const Trajectory& trajectory, const DriftDiagnostics& diagnostics,
                                 double tau, double dt_init);

struct StrongErrorConfig {
  std::vector<double> taus;
  double horizon = 1.0;
  std::size_t paths = 100;
  int ref_exponent = 14;  // dt_ref = 2^-ref_exponent dt_max
  int grid_exponent = 10;
  double radius = 10.0;   // paths leaving B_R are reported, not averaged
  bool reference_check = true;  // also run the reference at dt_ref / 2
  std::uint64_t seed = 1;
  Vector x0;
  StepperConfig stepper;  // tol is overridden per entry of `taus`
  int threads = 1;
};

struct StrongErrorRow {
  double tau = 0.0;
  double mse = 0.0;
  double stderr_ = 0.0;
  std::size_t paths_used = 0;
  std::size_t paths_truncated = 0;
  double mean_steps = 0.0;
  double runtime_seconds = -1.0;  // negative when timing is off
};

struct StrongErrorReport {
  std::vector<StrongErrorRow> rows;
  std::size_t paths = 0;
  double horizon = 0.0;
  double dt_ref = 0.0;
  /// Mean over paths of sup_t |x_ref(t) - x_ref/2(t)|^2; negative if skipped.
  double reference_self_difference = -1.0;
  std::uint64_t seed = 0;
};

/// Coupled strong-error sweep against a fixed-step Euler-Maruyama reference
/// on the same Brownian path. Per path the adaptive runs query the path
/// first (in the order of `taus`), then the reference refines it.
StrongErrorReport strong_error(const SdeProblem& problem, const MethodPair& pair,
                               const StrongErrorConfig& config, bool timing = false);

void write_strong_error_csv(std::ostream& out, const StrongErrorReport& report);

}  // namespace adaptsde
