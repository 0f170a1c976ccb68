#include "adaptsde/convergence.hpp"

#include "adaptsde/csv.hpp"
#include "adaptsde/errors.hpp"
#include "adaptsde/parallel.hpp"

#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <ostream>

namespace adaptsde {

Vector F1(const SdeProblem& problem, const Vector& u) {
  return jacobian_eval(problem, u) * problem.drift_at(u);
}

Vector local_error(const SdeProblem& problem, const Vector& u, double h) {
  if (!(h > 0.0)) throw InvalidArgument("local_error: h must be > 0");
  const Vector fu = problem.drift_at(u);
  const Vector shifted = u + h * fu;
  return problem.drift_at(shifted) - fu;
}

Vector F2(const SdeProblem& problem, const Vector& u, double h) {
  return (local_error(problem, u, h) - h * F1(problem, u)) / (h * h);
}

bool DriftDiagnostics::in_bad_set(const Vector& u) const {
  return F1(*problem, u).norm() <= epsilon;
}

bool DriftDiagnostics::in_good_region(const Vector& u) const {
  return u.norm() <= radius && !in_bad_set(u);
}

bool DriftDiagnostics::degenerate() const { return !(K_R > 1e-300); }

DriftDiagnostics estimate_diagnostics(const SdeProblem& problem, double radius, double epsilon,
                                      double dt_max, std::size_t samples, double inflation) {
  if (!(radius > 0.0) || !(epsilon > 0.0) || !(dt_max > 0.0)) {
    throw InvalidArgument("estimate_diagnostics: radius, epsilon and dt_max must be > 0");
  }
  if (samples == 0) throw InvalidArgument("estimate_diagnostics: samples must be positive");
  DriftDiagnostics diag;
  diag.problem = &problem;
  diag.radius = radius;
  diag.epsilon = epsilon;
  diag.dt_max = dt_max;

  const int m = problem.dim;
  boost::random::sobol qrng(static_cast<std::size_t>(m + 1));
  boost::random::uniform_01<double> unit;
  Vector u(m);
  while (diag.samples < samples) {
    for (int i = 0; i < m; ++i) u[i] = radius * (2.0 * unit(qrng) - 1.0);
    const double h = dt_max * (1.0 - unit(qrng));  // (0, dt_max]
    if (u.norm() > radius) continue;
    diag.K_R_sampled = std::max(diag.K_R_sampled, F2(problem, u, h).norm());
    ++diag.samples;
  }
  diag.K_R = inflation * diag.K_R_sampled;
  return diag;
}

std::string_view to_string(LemmaStatus status) {
  switch (status) {
    case LemmaStatus::Checked: return "checked";
    case LemmaStatus::HypothesisViolated: return "hypothesis_violated";
    case LemmaStatus::DegenerateCurvature: return "degenerate_curvature";
  }
  return "unknown";
}

void LemmaReport::merge(const LemmaReport& other) {
  paths += other.paths;
  steps_total += other.steps_total;
  steps_checked += other.steps_checked;
  segments += other.segments;
  segments_unconditioned += other.segments_unconditioned;
  steps_unconditioned += other.steps_unconditioned;
  unconditioned_over_bound += other.unconditioned_over_bound;
  max_ratio = std::max(max_ratio, other.max_ratio);
  violation_count += other.violation_count;
  for (const auto& v : other.violations) {
    if (violations.size() >= 32) break;
    violations.push_back(v);
  }
}

LemmaBoundChecker::LemmaBoundChecker(const DriftDiagnostics& diagnostics, double tau,
                                     double dt_init)
    : diag_(diagnostics), dt_init_(dt_init) {
  const int m = diagnostics.problem->dim;
  f_.resize(m);
  fx_.resize(m);
  jac_.resize(m, m);
  two_tau_over_eps_ = 2.0 * tau / diag_.epsilon;
  report_.tau = tau;
  report_.K_R = diag_.K_R;
  if (diag_.degenerate()) {
    report_.status = LemmaStatus::DegenerateCurvature;
    report_.note = "K_R vanishes; the bound's constants are undefined";
    return;
  }
  report_.tau_limit = diag_.tau_limit();
  report_.step_bound = std::min(diag_.h_bar(), two_tau_over_eps_);
  if (!(tau < report_.tau_limit)) {
    report_.status = LemmaStatus::HypothesisViolated;
    report_.note = "tau >= eps^2 / (12 K_R)";
  } else if (!(dt_init < two_tau_over_eps_)) {
    report_.status = LemmaStatus::HypothesisViolated;
    report_.note = "dt_{-1} >= 2 tau / eps";
  }
}

void LemmaBoundChecker::begin_path(std::uint64_t path_id) {
  path_ = path_id;
  dt_prev_ = dt_init_;
  inside_ = false;
  ++report_.paths;
}

void LemmaBoundChecker::on_step(std::uint64_t n, const Vector& x, double dt) {
  ++report_.steps_total;
  bool good = false;
  if (report_.status == LemmaStatus::Checked && x.norm() <= diag_.radius) {
    const SdeProblem& p = *diag_.problem;
    p.drift(x, f_);
    if (p.jacobian) {
      (*p.jacobian)(x, jac_);
    } else {
      jac_ = jacobian_eval(p, x);
    }
    fx_.noalias() = jac_.lazyProduct(f_);
    good = fx_.norm() > diag_.epsilon;
  }
  if (good) {
    if (!inside_) {
      inside_ = true;
      conditioned_ = dt_prev_ < two_tau_over_eps_;
      if (conditioned_) {
        ++report_.segments;
      } else {
        ++report_.segments_unconditioned;
      }
    }
    if (conditioned_) {
      ++report_.steps_checked;
      report_.max_ratio = std::max(report_.max_ratio, dt / report_.step_bound);
      if (dt > report_.step_bound) {
        ++report_.violation_count;
        if (report_.violations.size() < 32) {
          report_.violations.push_back(LemmaViolation{path_, n, dt, report_.step_bound});
        }
      }
    } else {
      ++report_.steps_unconditioned;
      if (dt > report_.step_bound) ++report_.unconditioned_over_bound;
    }
  } else {
    inside_ = false;
  }
  dt_prev_ = dt;
}

LemmaReport timestep_bound_check(const Trajectory& trajectory, const DriftDiagnostics& diagnostics,
                                 double tau, double dt_init) {
  if (!trajectory.detailed) {
    throw InvalidArgument("timestep_bound_check: trajectory was run without detail");
  }
  LemmaBoundChecker checker(diagnostics, tau, dt_init);
  checker.begin_path(0);
  for (std::size_t n = 0; n < trajectory.steps.size(); ++n) {
    checker.on_step(n, trajectory.states[n], trajectory.steps[n].dt);
  }
  return checker.report();
}

namespace {

// Fixed-step Euler-Maruyama on a shared path, with its continuous interpolant.
struct EulerReference {
  double dt = 0.0;
  std::vector<Vector> states;  // x at j dt

  void run(const SdeProblem& problem, const Vector& x0, BrownianPath& path, double horizon,
           double step) {
    dt = step;
    const auto count = static_cast<std::size_t>(std::ceil(horizon / step));
    states.assign(1, x0);
    states.reserve(count + 1);
    Vector f(problem.dim), dw(problem.noise_dim);
    Matrix g(problem.dim, problem.noise_dim);
    for (std::size_t j = 0; j < count; ++j) {
      const Vector& x = states.back();
      problem.drift(x, f);
      problem.diffusion(x, g);
      path.increment(j * step, (j + 1) * step, dw);
      states.push_back(x + step * f + g * dw);
    }
  }

  Vector at(const SdeProblem& problem, BrownianPath& path, double t) const {
    auto j = static_cast<std::size_t>(std::floor(t / dt));
    j = std::min(j, states.size() - 1);
    const double tj = j * dt;
    if (t == tj) return states[j];
    const Vector& x = states[j];
    return x + (t - tj) * problem.drift_at(x) + problem.diffusion_at(x) * path.increment(tj, t);
  }

  bool leaves(double radius) const {
    return std::any_of(states.begin(), states.end(),
                       [radius](const Vector& x) { return x.norm() > radius; });
  }
};

struct PathOutcome {
  std::vector<double> sup_error;
  std::vector<bool> truncated;
  std::vector<std::uint64_t> steps;
  std::vector<double> seconds;
  double self_difference = 0.0;
};

}  // namespace

StrongErrorReport strong_error(const SdeProblem& problem, const MethodPair& pair,
                               const StrongErrorConfig& config, bool timing) {
  if (config.taus.empty()) throw InvalidArgument("strong_error: empty tolerance list");
  if (config.paths == 0) throw InvalidArgument("strong_error: paths must be positive");
  if (!(config.horizon > 0.0)) throw InvalidArgument("strong_error: horizon must be > 0");
  if (config.x0.size() != problem.dim) throw InvalidArgument("strong_error: x0 has wrong size");
  const double dt_ref = std::ldexp(config.stepper.dt_max, -config.ref_exponent);
  const std::size_t grid = std::size_t{1} << config.grid_exponent;
  const std::size_t ntau = config.taus.size();

  std::vector<PathOutcome> outcomes(config.paths);
  parallel_for(config.paths, config.threads, [&](std::size_t i) {
    using clock = std::chrono::steady_clock;
    PathOutcome& out = outcomes[i];
    out.sup_error.assign(ntau, 0.0);
    out.truncated.assign(ntau, false);
    out.steps.assign(ntau, 0);
    out.seconds.assign(ntau, 0.0);
    BrownianPath path(problem.noise_dim, NoiseStream(config.seed, i));

    std::vector<Trajectory> runs;
    runs.reserve(ntau);
    for (std::size_t a = 0; a < ntau; ++a) {
      StepperConfig sc = config.stepper;
      sc.tol = config.taus[a];
      const auto start = clock::now();
      runs.push_back(run_path(config.x0, sc, pair, &path, config.horizon, true));
      out.seconds[a] += std::chrono::duration<double>(clock::now() - start).count();
      out.steps[a] = runs.back().step_count;
    }
    EulerReference ref;
    ref.run(problem, config.x0, path, config.horizon, dt_ref);
    const bool ref_out = ref.leaves(config.radius);
    if (config.reference_check) {
      EulerReference fine;
      fine.run(problem, config.x0, path, config.horizon, 0.5 * dt_ref);
      for (std::size_t g = 0; g <= grid; ++g) {
        const double t = config.horizon * static_cast<double>(g) / static_cast<double>(grid);
        out.self_difference = std::max(
            out.self_difference,
            (ref.at(problem, path, t) - fine.at(problem, path, t)).squaredNorm());
      }
    }
    for (std::size_t a = 0; a < ntau; ++a) {
      const auto start = clock::now();
      const Trajectory& traj = runs[a];
      double sup = 0.0;
      auto probe = [&](double t) {
        const Vector xa = interpolate(traj, t, InterpolantKind::Continuous);
        sup = std::max(sup, (xa - ref.at(problem, path, t)).squaredNorm());
      };
      for (std::size_t g = 0; g <= grid; ++g) {
        probe(config.horizon * static_cast<double>(g) / static_cast<double>(grid));
      }
      bool leaves = ref_out;
      for (std::size_t n = 0; n < traj.times.size() && traj.times[n] <= config.horizon; ++n) {
        probe(traj.times[n]);
        if (traj.states[n].norm() > config.radius) leaves = true;
      }
      out.sup_error[a] = sup;
      out.truncated[a] = leaves;
      out.seconds[a] += std::chrono::duration<double>(clock::now() - start).count();
    }
  });

  StrongErrorReport report;
  report.paths = config.paths;
  report.horizon = config.horizon;
  report.dt_ref = dt_ref;
  report.seed = config.seed;
  for (std::size_t a = 0; a < ntau; ++a) {
    StrongErrorRow row;
    row.tau = config.taus[a];
    double sum = 0.0, sum2 = 0.0, steps = 0.0, seconds = 0.0;
    for (const auto& out : outcomes) {
      steps += static_cast<double>(out.steps[a]);
      seconds += out.seconds[a];
      if (out.truncated[a]) {
        ++row.paths_truncated;
        continue;
      }
      sum += out.sup_error[a];
      sum2 += out.sup_error[a] * out.sup_error[a];
      ++row.paths_used;
    }
    const double n = static_cast<double>(row.paths_used);
    if (row.paths_used > 0) {
      row.mse = sum / n;
      const double var = row.paths_used > 1 ? (sum2 - n * row.mse * row.mse) / (n - 1.0) : 0.0;
      row.stderr_ = std::sqrt(std::max(var, 0.0) / n);
    } else {
      row.mse = std::numeric_limits<double>::quiet_NaN();
      row.stderr_ = std::numeric_limits<double>::quiet_NaN();
    }
    row.mean_steps = steps / static_cast<double>(config.paths);
    row.runtime_seconds = timing ? seconds : -1.0;
    report.rows.push_back(row);
  }
  if (config.reference_check) {
    double acc = 0.0;
    for (const auto& out : outcomes) acc += out.self_difference;
    report.reference_self_difference = acc / static_cast<double>(config.paths);
  }
  return report;
}

void write_strong_error_csv(std::ostream& out, const StrongErrorReport& report) {
  csv::Writer w(out);
  w.header({"tau", "mse_estimate", "stderr", "paths_truncated", "runtime_seconds", "paths",
            "mean_steps", "dt_ref", "reference_self_difference"});
  for (const auto& row : report.rows) {
    w.cell(row.tau).cell(row.mse).cell(row.stderr_).cell(row.paths_truncated);
    if (row.runtime_seconds < 0.0) {
      w.cell(std::string_view("NA"));
    } else {
      w.cell(row.runtime_seconds);
    }
    w.cell(report.paths).cell(row.mean_steps).cell(report.dt_ref).cell(
        report.reference_self_difference);
    w.end_row();
  }
}

}  // namespace adaptsde
