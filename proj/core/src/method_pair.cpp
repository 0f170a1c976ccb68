#include "adaptsde/method_pair.hpp"

namespace adaptsde {

Vector MethodPair::primary_drift(const Vector& x, double dt) const {
  Vector F(dim), Fbar(dim);
  drifts(x, dt, F, Fbar);
  return F;
}

Vector MethodPair::compare_drift(const Vector& x, double dt) const {
  Vector F(dim), Fbar(dim);
  drifts(x, dt, F, Fbar);
  return Fbar;
}

Matrix MethodPair::primary_diffusion(const Vector& x, double dt) const {
  Matrix G(dim, noise_dim), Gbar(dim, noise_dim);
  diffusions(x, dt, G, Gbar);
  return G;
}

Matrix MethodPair::compare_diffusion(const Vector& x, double dt) const {
  Matrix G(dim, noise_dim), Gbar(dim, noise_dim);
  diffusions(x, dt, G, Gbar);
  return Gbar;
}

MethodPair euler_pair(const SdeProblem& problem) {
  problem.validate();
  MethodPair pair;
  pair.label = "euler";
  pair.dim = problem.dim;
  pair.noise_dim = problem.noise_dim;
  pair.mean_scale = 2.0;
  pair.drifts = [f = problem.drift](const Vector& x, double dt, Vector& F, Vector& Fbar) {
    thread_local Vector x_star;
    f(x, F);
    x_star = x + dt * F;
    f(x_star, Fbar);
    Fbar = 0.5 * (F + Fbar);
  };
  pair.diffusions = [f = problem.drift, sigma = problem.diffusion](
                        const Vector& x, double dt, Matrix& G, Matrix& Gbar) {
    thread_local Vector fx;
    thread_local Vector x_star;
    fx.resize(x.size());
    f(x, fx);
    x_star = x + dt * fx;
    sigma(x, G);
    sigma(x_star, Gbar);
  };
  pair.step_diffusion = [sigma = problem.diffusion](const Vector& x, double, Matrix& G) {
    sigma(x, G);
  };
  return pair;
}

MethodPair symplectic_pair(const LangevinSpec& spec) {
  MethodPair pair;
  pair.label = "symplectic";
  pair.dim = 2;
  pair.noise_dim = 1;
  pair.mean_scale = 1.0;
  pair.drifts = [spec](const Vector& x, double dt, Vector& F, Vector& Fbar) {
    const double q = x[0];
    const double p = x[1];
    const double q_star = q + p * dt;
    const double force_star = -spec.potential_gradient(q_star) - spec.damping(q_star) * p;
    const double p_star = p + force_star * dt;
    const double q_mid = 0.5 * (q + q_star);
    const double p_mid = 0.5 * (p + p_star);
    F[0] = p;
    F[1] = force_star;
    Fbar[0] = p_mid;
    Fbar[1] = -spec.potential_gradient(q_mid) - spec.damping(q_mid) * p_mid;
  };
  pair.diffusions = [spec](const Vector& x, double dt, Matrix& G, Matrix& Gbar) {
    const double q_star = x[0] + x[1] * dt;
    const double q_mid = 0.5 * (x[0] + q_star);
    G(0, 0) = 0.0;
    G(1, 0) = spec.noise_amplitude(q_star);
    Gbar(0, 0) = 0.0;
    Gbar(1, 0) = spec.noise_amplitude(q_mid);
  };
  pair.step_diffusion = [spec](const Vector& x, double dt, Matrix& G) {
    G(0, 0) = 0.0;
    G(1, 0) = spec.noise_amplitude(x[0] + x[1] * dt);
  };
  return pair;
}

}  // namespace adaptsde
