#pragma once

#include "adaptsde/martingale.hpp"
#include "adaptsde/problem.hpp"
#include "adaptsde/stepper.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace adaptsde {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ExperimentKind { Converge, Ergodic, Langevin, Steps, Martingale, Lyapunov };

std::string_view to_string(ExperimentKind kind);
/// Throws ConfigError on an unknown name.
ExperimentKind experiment_from_string(std::string_view name);

struct ProblemSelector {
  std::string kind = "cubic";  // cubic | langevin
  int dim = 2;                 // cubic only
  double noise_scale = 1.0;
};

struct ConvergeOptions {
  int ref_exponent = 14;
  int grid_exponent = 10;
  double radius = 10.0;
  bool reference_check = true;
  bool timing = false;  // runtime column is NA unless set
};

struct ErgodicOptions {
  std::vector<int> dims = {1, 2, 3};
  double lo = -3.0;
  double hi = 3.0;
  double window = 0.1;  // profile prominence windows
  double flank = 0.25;
};

struct LangevinOptions {
  std::vector<double> fixed_dts = {0.05, 0.1, 0.2, 0.4};
};

struct LemmaOptions {
  double radius = 3.0;
  double epsilon = 0.5;
  std::optional<double> tau;  // default eps^2 / (24 K_R)
  std::size_t paths = 100;
  double horizon = 10.0;
  std::size_t samples = 10000;
  double inflation = 1.2;
};

struct StepsOptions {
  std::optional<LemmaOptions> lemma;
};

struct MartingaleOptions {
  std::vector<VariancePolicy> policies = {VariancePolicy::Constant, VariancePolicy::StateDependent,
                                          VariancePolicy::Adversarial};
  double cap = 1.0;
  std::size_t steps = 1000;
  std::vector<std::pair<double, double>> params = {{1.0, 2.0}, {1.0, 4.0}, {2.0, 2.0}};
};

struct TailOptions {
  std::size_t paths = 10000;
  double horizon = 10.0;
  std::vector<double> levels = {1.0, 2.0, 4.0, 8.0};
  double noise_scale = 2.0;
  double dt_max = 0.0078125;
  double tau = 0.05;
  double radius = 10.0;  // for the noise bound sample
};

struct LyapunovOptions {
  std::size_t chains = 20;
  std::size_t observations = 501;  // 20 x 500 transitions
  std::optional<TailOptions> tail;
};

/// Everything one experiment run needs. Fields left unset in the JSON take
/// kind-dependent defaults (see resolve_defaults).
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Converge;
  ProblemSelector problem;
  std::string pair = "euler";  // euler | symplectic
  StepperConfig stepper;
  std::vector<double> taus;
  std::optional<double> horizon;
  std::optional<std::size_t> paths;
  int bins = 120;
  double burn_in = 0.1;
  std::vector<double> x0;  // empty: kind default
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output = "out";

  ConvergeOptions converge;
  ErgodicOptions ergodic;
  LangevinOptions langevin;
  StepsOptions steps;
  MartingaleOptions martingale;
  LyapunovOptions lyapunov;

  /// Fills horizon, paths, taus and the stepper defaults for the kind.
  void resolve_defaults();
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses a JSON document. Unknown keys are rejected. The result has
/// defaults resolved and is validated. `expected` fills a missing
/// "experiment" key and must match a present one.
ExperimentConfig parse_config(std::string_view json_text,
                              std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& file,
                             std::optional<ExperimentKind> expected = std::nullopt);
/// Canonical JSON echo of a resolved config.
std::string config_to_json(const ExperimentConfig& config);

SdeProblem build_problem(const ProblemSelector& selector);

struct ArtifactFile {
  std::string name;
  std::string sha256;
};

enum class RunStatus { Ok, Failed, Error };

struct ExperimentResult {
  RunStatus status = RunStatus::Ok;
  std::string message;  // why the run failed
  std::filesystem::path directory;
  std::vector<ArtifactFile> files;
  double wall_seconds = 0.0;

  /// 0 ok, 1 failed assertion-class check, 3 runtime error.
  int exit_code() const;
};

/// Runs the experiment, writes its CSVs into config.output and a
/// manifest.json listing every file with its SHA-256. A run that fails
/// still writes a manifest, with status FAILED.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& file);

}  // namespace adaptsde
