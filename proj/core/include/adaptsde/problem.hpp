#pragma once

#include "adaptsde/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace adaptsde {

/// Dissipativity constants for <f(x), x> <= alpha - beta |x|^2.
struct Coercivity {
  double alpha = 0.0;
  double beta = 0.0;
};

/// An Ito SDE dx = f(x) dt + Sigma(x) dW on R^dim driven by a
/// noise_dim-dimensional Wiener process.
///
/// `diffusion` is the single diffusion field; the literature also writes it
/// as g. It returns a dim x noise_dim matrix, which may be rectangular or
/// degenerate (the Langevin system only drives its momentum).
struct SdeProblem {
  std::string name;
  int dim = 0;
  int noise_dim = 0;
  DriftFn drift;
  DiffusionFn diffusion;
  std::optional<JacobianFn> jacobian;
  std::optional<Coercivity> coercivity;
  /// Unnormalized stationary density, when known in closed form.
  std::optional<DensityFn> invariant_density;
  /// Closed-form unnormalized marginal of one coordinate, when the
  /// invariant density factorizes. Falls back to quadrature otherwise.
  std::function<double(int axis, double value)> marginal_density;

  /// Throws InvalidArgument on inconsistent shapes.
  void validate() const;

  Vector drift_at(const Vector& x) const;
  Matrix diffusion_at(const Vector& x) const;
};

/// d identical decoupled copies of dy = (y - y^3) dt + dW.
SdeProblem make_cubic_gradient(int d);

/// Potential, damping and noise amplitude of the damped-driven Hamiltonian
///   dq = p dt,  dp = -[delta(q) p + Phi'(q)] dt + Sigma(q) dW,
/// with the fluctuation-dissipation relation 2 delta(q) = Sigma(q)^2.
struct LangevinSpec {
  ScalarFn potential;
  ScalarFn potential_gradient;
  ScalarFn noise_amplitude;
  ScalarFn damping;

  double hamiltonian(double q, double p) const { return 0.5 * p * p + potential(q); }
};

/// Phi(q) = (1 - q^2)^2 / 4 and Sigma(q) = 4 (5q^2 + 1) / (5 (q^2 + 1)).
LangevinSpec default_langevin_spec();

SdeProblem make_langevin(const LangevinSpec& spec);
SdeProblem make_langevin();

/// Copy of `problem` with the diffusion multiplied by `scale` (0 gives the
/// deterministic limit). The invariant density is dropped when scale != 1;
/// coercivity only concerns the drift and is kept.
SdeProblem with_diffusion_scale(const SdeProblem& problem, double scale);

/// Declared Jacobian, or a central difference with per-coordinate step
/// sqrt(eps) * (1 + |u_i|).
Matrix jacobian_eval(const SdeProblem& problem, const Vector& u);

struct CoercivityCheck {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // max over samples of <f,x> - (alpha - beta|x|^2)
};

/// Quasi-random (Sobol) spot check of the declared coercivity on B(0, radius).
CoercivityCheck check_coercivity(const SdeProblem& problem, double radius,
                                 std::size_t samples = 10000);

/// Composite Simpson on [lo, hi], doubling the panel count until the
/// relative change drops below `rel_tol`.
double simpson(const std::function<double(double)>& g, double lo, double hi,
               double rel_tol = 1e-8, int max_doublings = 20);

/// Normalized marginal density of coordinate `axis`. Uses the closed-form
/// marginal when present; otherwise integrates the joint density over the
/// other coordinates on [-half_width, half_width].
std::function<double(double)> normalized_marginal(const SdeProblem& problem, int axis,
                                                  double half_width = 8.0);

}  // namespace adaptsde
