#pragma once

#include "adaptsde/problem.hpp"
#include "adaptsde/types.hpp"

#include <string>

namespace adaptsde {

/// Two explicit one-step maps sharing one noise draw:
///   x+    = x + F(x, dt) dt    + G(x, dt) sqrt(dt) eta
///   xbar+ = x + Fbar(x, dt) dt + Gbar(x, dt) sqrt(dt) eta
/// The first (primary) map advances the chain; the second only feeds the
/// error metric.
struct MethodPair {
  std::string label;
  int dim = 0;
  int noise_dim = 0;
  /// The drift-mean metric is mean_scale * |F - Fbar|. The Euler pair uses 2,
  /// which turns it into |f(x) - f(x*)|; the symplectic pair uses 1.
  double mean_scale = 1.0;
  /// Writes F and Fbar (both pre-sized to dim).
  std::function<void(const Vector& x, double dt, Vector& F, Vector& Fbar)> drifts;
  /// Writes G and Gbar (both pre-sized to dim x noise_dim).
  std::function<void(const Vector& x, double dt, Matrix& G, Matrix& Gbar)> diffusions;
  /// Optional: writes G alone. Used when the controller ignores Gbar.
  std::function<void(const Vector& x, double dt, Matrix& G)> step_diffusion;

  Vector primary_drift(const Vector& x, double dt) const;
  Vector compare_drift(const Vector& x, double dt) const;
  Matrix primary_diffusion(const Vector& x, double dt) const;
  Matrix compare_diffusion(const Vector& x, double dt) const;
};

/// Forward Euler against the trapezoidal predictor-corrector:
/// F = f(x), G = Sigma(x), Fbar = (f(x) + f(x*)) / 2, Gbar = Sigma(x*),
/// with x* = x + dt f(x).
MethodPair euler_pair(const SdeProblem& problem);

/// Split symplectic-Euler step for the Langevin system compared against its
/// midpoint counterpart. State is (q, p).
MethodPair symplectic_pair(const LangevinSpec& spec);

}  // namespace adaptsde
