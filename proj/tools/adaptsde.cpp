// adaptsde <kind> --config <file> [--seed N] [--out DIR] [--threads N]
//
// Exit codes: 0 ok, 1 a checked bound or law failed, 2 bad configuration,
// 3 the run itself stopped with an error.

#include "adaptsde/errors.hpp"
#include "adaptsde/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdlib>
#include <optional>
#include <string>

namespace {

constexpr int kConfigError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-step SDE experiments"};
  app.set_version_flag("--version", std::string(adaptsde::kVersion));

  std::string kind;
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  bool dry_run = false;

  app.add_option("kind", kind, "converge | ergodic | langevin | steps | martingale | lyapunov")
      ->required()
      ->check(CLI::IsMember({"converge", "ergodic", "langevin", "steps", "martingale", "lyapunov"}));
  app.add_option("--config,-c", config_file, "JSON experiment configuration")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out,-o", out_dir, "Output directory (overrides ADAPTSDE_OUT and the config)");
  app.add_option("--threads,-j", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--print-config", dry_run, "Print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  adaptsde::ExperimentConfig config;
  try {
    config = adaptsde::load_config(config_file, adaptsde::experiment_from_string(kind));
    if (seed) config.seed = *seed;
    if (const char* env = std::getenv("ADAPTSDE_OUT"); env && *env) config.output = env;
    if (out_dir) config.output = *out_dir;
    if (threads) config.threads = *threads;
    config.validate();
  } catch (const adaptsde::Error& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  }

  if (dry_run) {
    fmt::print("{}\n", adaptsde::config_to_json(config));
    return 0;
  }

  const adaptsde::ExperimentResult result = adaptsde::run_experiment(config);
  for (const auto& f : result.files) fmt::print("{}  {}\n", f.sha256, f.name);
  switch (result.status) {
    case adaptsde::RunStatus::Ok:
      fmt::print("{}: ok in {:.2f} s -> {}\n", kind, result.wall_seconds, result.directory.string());
      break;
    case adaptsde::RunStatus::Failed:
      fmt::print(stderr, "{}: FAILED: {}\n", kind, result.message);
      break;
    case adaptsde::RunStatus::Error:
      fmt::print(stderr, "{}: error: {}\n", kind, result.message);
      break;
  }
  return result.exit_code();
}
