#include "adaptsde/martingale.hpp"

#include "adaptsde/csv.hpp"
#include "adaptsde/errors.hpp"
#include "adaptsde/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace adaptsde {

std::string_view to_string(VariancePolicy policy) {
  switch (policy) {
    case VariancePolicy::Constant: return "constant";
    case VariancePolicy::StateDependent: return "state_dependent";
    case VariancePolicy::Adversarial: return "adversarial";
  }
  return "unknown";
}

VariancePolicy policy_from_string(std::string_view name) {
  for (auto p : {VariancePolicy::Constant, VariancePolicy::StateDependent,
                 VariancePolicy::Adversarial}) {
    if (to_string(p) == name) return p;
  }
  throw InvalidArgument("unknown variance policy '" + std::string(name) + "'");
}

double PolicySpec::variance(double M) const {
  switch (kind) {
    case VariancePolicy::Constant: return cap;
    case VariancePolicy::StateDependent: return cap / (1.0 + M * M);
    case VariancePolicy::Adversarial: return M > 0.0 ? cap : 0.1 * cap;
  }
  return cap;
}

void MartingalePath::push_gaussian(double eta, double var) {
  increments.push_back(eta);
  variances.push_back(var);
  tilde_increments.push_back(eta * eta - var);
  tilde_variances.push_back(2.0 * var * var);
  component_variance.push_back(var);
}

namespace {

std::vector<double> running(const std::vector<double>& v) {
  std::vector<double> out(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i + 1] = out[i] + v[i];
  return out;
}

}  // namespace

std::vector<double> MartingalePath::M() const { return running(increments); }
std::vector<double> MartingalePath::bracket_M() const { return running(variances); }
std::vector<double> MartingalePath::Mtilde() const { return running(tilde_increments); }
std::vector<double> MartingalePath::bracket_Mtilde() const { return running(tilde_variances); }

MartingalePath simulate_path(const PolicySpec& policy, std::size_t steps, NoiseStream& stream) {
  MartingalePath path;
  path.increments.reserve(steps);
  double M = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double var = policy.variance(M);
    const double eta = std::sqrt(var) * stream.next_gaussian();
    path.push_gaussian(eta, var);
    M += eta;
  }
  return path;
}

std::vector<MartingalePath> simulate_paths(const PolicySpec& policy, std::size_t steps,
                                           std::size_t paths, std::uint64_t seed, int threads) {
  std::vector<MartingalePath> out(paths);
  parallel_for(paths, threads, [&](std::size_t i) {
    NoiseStream stream(seed, i);
    out[i] = simulate_path(policy, steps, stream);
  });
  return out;
}

std::string_view to_string(Estimate estimate) {
  return estimate == Estimate::M ? "M" : "Mtilde";
}

void BoundReport::finalize() {
  frequency = paths > 0 ? static_cast<double>(exceedances) / static_cast<double>(paths) : 0.0;
  stderr_ = paths > 0 ? std::sqrt(frequency * (1.0 - frequency) / static_cast<double>(paths)) : 0.0;
}

double bound_M(double alpha, double beta) { return std::exp(-alpha * beta); }

double bound_Mtilde(double cap, double alpha, double beta) {
  const double lambda2 = 2.0 * cap + 1.0 / alpha;
  return std::exp(-beta / lambda2);
}

namespace {

void check_params(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta >= 0.0)) {
    throw InvalidArgument("martingale bound: requires alpha > 0 and beta >= 0");
  }
}

// sup over k = 0..n of (X_k - alpha/2 <X>_k), X_0 = <X>_0 = 0.
double sup_compensated(const std::vector<double>& inc, const std::vector<double>& var,
                       double alpha) {
  double x = 0.0, sup = 0.0;
  for (std::size_t k = 0; k < inc.size(); ++k) {
    x += inc[k] - 0.5 * alpha * var[k];
    sup = std::max(sup, x);
  }
  return sup;
}

}  // namespace

BoundReport check_bound_M(const std::vector<MartingalePath>& ensemble, double alpha, double beta) {
  check_params(alpha, beta);
  BoundReport r;
  r.estimate = Estimate::M;
  r.alpha = alpha;
  r.beta = beta;
  r.bound = bound_M(alpha, beta);
  r.paths = ensemble.size();
  for (const auto& path : ensemble) {
    if (sup_compensated(path.increments, path.variances, alpha) >= beta) ++r.exceedances;
  }
  r.finalize();
  return r;
}

BoundReport check_bound_Mtilde(const std::vector<MartingalePath>& ensemble, double cap,
                               double alpha, double beta) {
  check_params(alpha, beta);
  BoundReport r;
  r.estimate = Estimate::Mtilde;
  r.alpha = alpha;
  r.beta = beta;
  r.bound = bound_Mtilde(cap, alpha, beta);
  r.paths = ensemble.size();
  for (const auto& path : ensemble) {
    for (double v : path.component_variance) {
      if (v > cap) throw CapViolated("check_bound_Mtilde: variance exceeds the declared cap");
    }
    if (sup_compensated(path.tilde_increments, path.tilde_variances, alpha) >= beta) {
      ++r.exceedances;
    }
  }
  r.finalize();
  return r;
}

std::vector<BoundReport> martingale_study(const PolicySpec& policy, std::size_t steps,
                                          std::size_t paths,
                                          const std::vector<std::pair<double, double>>& params,
                                          std::uint64_t seed, int threads) {
  for (const auto& [a, b] : params) check_params(a, b);
  const std::size_t np = params.size();
  // Per path: one bit per (param, estimate).
  std::vector<std::vector<char>> hits(paths);
  parallel_for(paths, threads, [&](std::size_t i) {
    NoiseStream stream(seed, i);
    std::vector<double> supM(np, 0.0), supT(np, 0.0);
    double M = 0.0, T = 0.0, bM = 0.0, bT = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double var = policy.variance(M);
      const double eta = std::sqrt(var) * stream.next_gaussian();
      M += eta;
      T += eta * eta - var;
      bM += var;
      bT += 2.0 * var * var;
      for (std::size_t j = 0; j < np; ++j) {
        const double half = 0.5 * params[j].first;
        supM[j] = std::max(supM[j], M - half * bM);
        supT[j] = std::max(supT[j], T - half * bT);
      }
    }
    auto& h = hits[i];
    h.resize(2 * np);
    for (std::size_t j = 0; j < np; ++j) {
      h[2 * j] = supM[j] >= params[j].second;
      h[2 * j + 1] = supT[j] >= params[j].second;
    }
  });
  std::vector<BoundReport> reports;
  for (std::size_t j = 0; j < np; ++j) {
    for (Estimate e : {Estimate::M, Estimate::Mtilde}) {
      BoundReport r;
      r.policy = std::string(to_string(policy.kind));
      r.estimate = e;
      r.alpha = params[j].first;
      r.beta = params[j].second;
      r.bound = e == Estimate::M ? bound_M(r.alpha, r.beta) : bound_Mtilde(policy.cap, r.alpha, r.beta);
      r.paths = paths;
      const std::size_t slot = 2 * j + (e == Estimate::M ? 0 : 1);
      for (const auto& h : hits) r.exceedances += h[slot] ? 1 : 0;
      r.finalize();
      reports.push_back(r);
    }
  }
  return reports;
}

StepperMartingales stepper_martingales(const Trajectory& trajectory, const SdeProblem& problem,
                                       double sigma2_bound) {
  if (!trajectory.detailed) {
    throw InvalidArgument("stepper_martingales: trajectory was run without detail");
  }
  StepperMartingales out;
  auto& path = out.path;
  const std::size_t n = trajectory.steps.size();
  path.increments.reserve(n);
  out.bracket_bound.assign(1, 0.0);
  Matrix g(problem.dim, problem.noise_dim);
  for (std::size_t j = 0; j < n; ++j) {
    const StepRecord& rec = trajectory.steps[j];
    problem.diffusion(trajectory.states[j], g);
    const Vector noise = g * rec.eta;
    const Vector gx = g.transpose() * rec.x_star;
    const Matrix cov = g * g.transpose();
    const double root = std::sqrt(rec.dt);
    path.increments.push_back(2.0 * root * rec.x_star.dot(noise));
    path.variances.push_back(4.0 * rec.dt * gx.squaredNorm());
    path.tilde_increments.push_back(rec.dt * (noise.squaredNorm() - cov.trace()));
    path.tilde_variances.push_back(2.0 * rec.dt * rec.dt * (cov * cov).trace());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    path.component_variance.push_back(rec.dt * std::max(0.0, eig.eigenvalues().maxCoeff()));
    out.bracket_bound.push_back(out.bracket_bound.back() +
                                4.0 * rec.dt * rec.x_star.squaredNorm() * sigma2_bound);
  }
  return out;
}

void write_bound_csv(std::ostream& out, const std::vector<BoundReport>& reports) {
  csv::Writer w(out);
  w.header({"policy", "estimate", "alpha", "beta", "bound", "empirical_frequency", "stderr",
            "exceedances", "paths", "verdict"});
  for (const auto& r : reports) {
    w.cell(std::string_view(r.policy)).cell(to_string(r.estimate)).cell(r.alpha).cell(r.beta);
    w.cell(r.bound).cell(r.frequency).cell(r.stderr_).cell(static_cast<unsigned long long>(r.exceedances));
    w.cell(r.paths).cell(std::string_view(r.passed() ? "pass" : "fail"));
    w.end_row();
  }
}

}  // namespace adaptsde
