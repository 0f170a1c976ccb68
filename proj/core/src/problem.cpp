#include "adaptsde/problem.hpp"

#include "adaptsde/errors.hpp"

#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace adaptsde {

void SdeProblem::validate() const {
  if (dim < 1) throw InvalidArgument("SdeProblem: dim must be >= 1");
  if (noise_dim < 1) throw InvalidArgument("SdeProblem: noise_dim must be >= 1");
  if (!drift || !diffusion) throw InvalidArgument("SdeProblem: drift and diffusion are required");
  if (coercivity && (coercivity->alpha < 0.0 || coercivity->beta <= 0.0)) {
    throw InvalidArgument("SdeProblem: coercivity constants need alpha >= 0 and beta > 0");
  }
}

Vector SdeProblem::drift_at(const Vector& x) const {
  Vector out(dim);
  drift(x, out);
  return out;
}

Matrix SdeProblem::diffusion_at(const Vector& x) const {
  Matrix out(dim, noise_dim);
  diffusion(x, out);
  return out;
}

namespace {

double cubic_log_density(double y) { return y * y - 0.5 * y * y * y * y; }

}  // namespace

SdeProblem make_cubic_gradient(int d) {
  if (d < 1) throw InvalidArgument("make_cubic_gradient: dimension must be >= 1");
  SdeProblem p;
  p.name = "cubic" + std::to_string(d);
  p.dim = d;
  p.noise_dim = d;
  p.drift = [](const Vector& x, Vector& out) {
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = x[i] - x[i] * x[i] * x[i];
  };
  p.diffusion = [](const Vector&, Matrix& out) { out.setIdentity(); };
  p.jacobian = [](const Vector& x, Matrix& out) {
    out.setZero();
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i, i) = 1.0 - 3.0 * x[i] * x[i];
  };
  // (1 + beta) y^2 - y^4 <= (1 + beta)^2 / 4 per component; beta = 1.
  p.coercivity = Coercivity{static_cast<double>(d), 1.0};
  p.invariant_density = [](const Vector& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += cubic_log_density(x[i]);
    return std::exp(s);
  };
  p.marginal_density = [](int, double y) { return std::exp(cubic_log_density(y)); };
  return p;
}

LangevinSpec default_langevin_spec() {
  LangevinSpec s;
  s.potential = [](double q) {
    const double a = 1.0 - q * q;
    return 0.25 * a * a;
  };
  s.potential_gradient = [](double q) { return q * q * q - q; };
  s.noise_amplitude = [](double q) {
    const double q2 = q * q;
    return 4.0 * (5.0 * q2 + 1.0) / (5.0 * (q2 + 1.0));
  };
  s.damping = [amp = s.noise_amplitude](double q) {
    const double a = amp(q);
    return 0.5 * a * a;
  };
  return s;
}

SdeProblem make_langevin(const LangevinSpec& spec) {
  SdeProblem p;
  p.name = "langevin";
  p.dim = 2;
  p.noise_dim = 1;
  p.drift = [spec](const Vector& x, Vector& out) {
    const double q = x[0];
    const double mom = x[1];
    out[0] = mom;
    out[1] = -(spec.damping(q) * mom + spec.potential_gradient(q));
  };
  p.diffusion = [spec](const Vector& x, Matrix& out) {
    out(0, 0) = 0.0;
    out(1, 0) = spec.noise_amplitude(x[0]);
  };
  p.invariant_density = [spec](const Vector& x) {
    return std::exp(-spec.hamiltonian(x[0], x[1]));
  };
  p.marginal_density = [spec](int axis, double v) {
    return axis == 0 ? std::exp(-spec.potential(v)) : std::exp(-0.5 * v * v);
  };
  return p;
}

SdeProblem make_langevin() { return make_langevin(default_langevin_spec()); }

SdeProblem with_diffusion_scale(const SdeProblem& problem, double scale) {
  SdeProblem p = problem;
  p.name = problem.name + "@noise" + std::to_string(scale);
  p.diffusion = [inner = problem.diffusion, scale](const Vector& x, Matrix& out) {
    inner(x, out);
    out *= scale;
  };
  if (scale != 1.0) {
    p.invariant_density.reset();
    p.marginal_density = nullptr;
  }
  return p;
}

Matrix jacobian_eval(const SdeProblem& problem, const Vector& u) {
  Matrix jac(problem.dim, problem.dim);
  if (problem.jacobian) {
    (*problem.jacobian)(u, jac);
    return jac;
  }
  const double step_scale = std::cbrt(std::numeric_limits<double>::epsilon());
  Vector probe = u;
  Vector plus(problem.dim);
  Vector minus(problem.dim);
  for (int i = 0; i < problem.dim; ++i) {
    const double h = step_scale * (1.0 + std::abs(u[i]));
    probe[i] = u[i] + h;
    problem.drift(probe, plus);
    probe[i] = u[i] - h;
    problem.drift(probe, minus);
    probe[i] = u[i];
    jac.col(i) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

CoercivityCheck check_coercivity(const SdeProblem& problem, double radius, std::size_t samples) {
  if (!problem.coercivity) throw InvalidArgument("check_coercivity: problem declares no coercivity");
  const auto [alpha, beta] = *problem.coercivity;
  CoercivityCheck result;
  result.worst_margin = -std::numeric_limits<double>::infinity();
  boost::random::sobol qrng(static_cast<std::size_t>(problem.dim));
  boost::random::uniform_01<double> unit;
  Vector x(problem.dim);
  Vector fx(problem.dim);
  while (result.samples < samples) {
    for (int i = 0; i < problem.dim; ++i) x[i] = radius * (2.0 * unit(qrng) - 1.0);
    if (x.norm() > radius) continue;
    problem.drift(x, fx);
    const double margin = fx.dot(x) - (alpha - beta * x.squaredNorm());
    result.worst_margin = std::max(result.worst_margin, margin);
    if (margin > 0.0) ++result.violations;
    ++result.samples;
  }
  return result;
}

double simpson(const std::function<double(double)>& g, double lo, double hi, double rel_tol,
               int max_doublings) {
  int panels = 64;
  auto rule = [&](int n) {
    const double h = (hi - lo) / n;
    double acc = g(lo) + g(hi);
    for (int i = 1; i < n; ++i) acc += g(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
  };
  double prev = rule(panels);
  for (int it = 0; it < max_doublings; ++it) {
    panels *= 2;
    const double next = rule(panels);
    if (std::abs(next - prev) <= rel_tol * std::abs(next)) return next;
    prev = next;
  }
  return prev;
}

namespace {

// Integrates the joint density over coordinates coord.. (skipping `axis`).
double integrate_out(const DensityFn& density, Vector& point, int axis, int coord,
                     double half_width) {
  if (coord == point.size()) return density(point);
  if (coord == axis) return integrate_out(density, point, axis, coord + 1, half_width);
  return simpson(
      [&](double v) {
        point[coord] = v;
        return integrate_out(density, point, axis, coord + 1, half_width);
      },
      -half_width, half_width, 1e-9, 8);
}

}  // namespace

std::function<double(double)> normalized_marginal(const SdeProblem& problem, int axis,
                                                  double half_width) {
  if (axis < 0 || axis >= problem.dim) throw InvalidArgument("normalized_marginal: bad axis");
  std::function<double(double)> raw;
  if (problem.marginal_density) {
    raw = [m = problem.marginal_density, axis](double v) { return m(axis, v); };
  } else if (problem.invariant_density) {
    raw = [density = *problem.invariant_density, axis, half_width,
           dim = problem.dim](double v) {
      Vector point = Vector::Zero(dim);
      point[axis] = v;
      return integrate_out(density, point, axis, 0, half_width);
    };
  } else {
    throw InvalidArgument("normalized_marginal: problem has no invariant density");
  }
  const double z = simpson(raw, -half_width, half_width, 1e-8);
  return [raw, z](double v) { return raw(v) / z; };
}

}  // namespace adaptsde
