#pragma once

#include "adaptsde/noise.hpp"
#include "adaptsde/problem.hpp"
#include "adaptsde/stepper.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace adaptsde {

enum class VariancePolicy { Constant, StateDependent, Adversarial };

std::string_view to_string(VariancePolicy policy);
VariancePolicy policy_from_string(std::string_view name);

/// Conditional variance of the next increment given the running value M:
///   Constant        cap
///   StateDependent  cap / (1 + M^2)
///   Adversarial     cap if M > 0, else cap / 10
/// All presets stay below `cap`.
struct PolicySpec {
  VariancePolicy kind = VariancePolicy::Constant;
  double cap = 1.0;

  double variance(double M) const;
};

/// One adapted sequence and its two martingales:
///   M_n = sum eta_k                     <M>_n = sum var_k
///   Mt_n = sum tilde_k                  <Mt>_n = sum tilde_var_k
/// For Gaussian increments tilde_k = eta_k^2 - var_k and tilde_var_k =
/// 2 var_k^2. `component_variance` is the largest variance of any Gaussian
/// component behind tilde_k; it is what the variance cap constrains.
struct MartingalePath {
  std::vector<double> increments;
  std::vector<double> variances;
  std::vector<double> tilde_increments;
  std::vector<double> tilde_variances;
  std::vector<double> component_variance;

  std::size_t steps() const { return increments.size(); }
  void push_gaussian(double eta, double var);

  /// Running values at n = 0..steps().
  std::vector<double> M() const;
  std::vector<double> bracket_M() const;
  std::vector<double> Mtilde() const;
  std::vector<double> bracket_Mtilde() const;
};

MartingalePath simulate_path(const PolicySpec& policy, std::size_t steps, NoiseStream& stream);

/// Paths use streams (seed, path index).
std::vector<MartingalePath> simulate_paths(const PolicySpec& policy, std::size_t steps,
                                           std::size_t paths, std::uint64_t seed, int threads = 1);

enum class Estimate { M, Mtilde };
std::string_view to_string(Estimate estimate);

struct BoundReport {
  std::string policy;
  Estimate estimate = Estimate::M;
  double alpha = 0.0;
  double beta = 0.0;
  double bound = 0.0;
  std::size_t paths = 0;
  std::uint64_t exceedances = 0;
  double frequency = 0.0;
  double stderr_ = 0.0;
  double slack = 3.0;  // in binomial standard errors

  /// frequency <= bound + slack * stderr.
  bool passed() const { return frequency <= bound + slack * stderr_; }
  void finalize();
};

/// exp(-alpha beta).
double bound_M(double alpha, double beta);
/// exp(-beta / lambda^2), lambda^2 = 2 cap + 1 / alpha.
double bound_Mtilde(double cap, double alpha, double beta);

/// Frequency of sup_k (M_k - alpha/2 <M>_k) >= beta over the ensemble.
BoundReport check_bound_M(const std::vector<MartingalePath>& ensemble, double alpha, double beta);
/// Same for Mt. Throws CapViolated if any component variance exceeds `cap`.
BoundReport check_bound_Mtilde(const std::vector<MartingalePath>& ensemble, double cap,
                               double alpha, double beta);

/// Streams `paths` synthetic paths without storing them and checks both
/// estimates at every (alpha, beta). Reports come in the order
/// (pair 0, M), (pair 0, Mt), (pair 1, M), ...
std::vector<BoundReport> martingale_study(const PolicySpec& policy, std::size_t steps,
                                          std::size_t paths,
                                          const std::vector<std::pair<double, double>>& params,
                                          std::uint64_t seed, int threads = 1);

/// Martingales of the moment recursion along a detailed trajectory:
///   xi_{n+1}  = 2 sqrt(dt_n) <x*_n, Sigma(x_n) eta_{n+1}>
///   xit_{n+1} = dt_n (|Sigma(x_n) eta_{n+1}|^2 - sigma^2(x_n)),  sigma^2(x) = tr(Sigma Sigma^T)
/// The second is a sum of independent centred weighted chi-squares, so its
/// component variances are dt_n times the eigenvalues of Sigma Sigma^T.
struct StepperMartingales {
  MartingalePath path;
  /// Running sum of 4 dt_j |x*_j|^2 sigma2_bound.
  std::vector<double> bracket_bound;
};

StepperMartingales stepper_martingales(const Trajectory& trajectory, const SdeProblem& problem,
                                       double sigma2_bound);

void write_bound_csv(std::ostream& out, const std::vector<BoundReport>& reports);

}  // namespace adaptsde
