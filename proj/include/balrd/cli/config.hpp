#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "balrd/problems.hpp"
#include "balrd/trainer.hpp"

namespace balrd::cli {

struct OutputConfig {
  std::filesystem::path directory = "runs";
  bool csv = true;
  bool json = true;
  double smoothing = 0.9;  // EMA factor for the plot-ready speed export
};

enum class ChainMode { kNone, kFromFirst, kSequential };

struct SweepConfig {
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds{0};
  std::vector<Mode> modes{Mode::kStandard};
  ChainMode chain = ChainMode::kNone;
  std::optional<int> chain_epochs;
  /// Build solution2 runs by fine-tuning the standard run at the same
  /// (lambda, seed) instead of training from scratch.
  bool solution2_fine_tune = false;
  int workers = 0;  // 0: available parallelism
};

struct AblateConfig {
  /// Relative rise of the final epoch loss above the run's best epoch loss
  /// that counts as non-convergence.
  double divergence_threshold = 0.05;
};

/// Validated experiment definition. `problem` keeps the raw problem section
/// (already checked) so runs can rebuild it with a different trade-off.
struct ExperimentConfig {
  nlohmann::json problem;
  TrainConfig train;
  OutputConfig output;
  std::optional<SweepConfig> sweep;
  AblateConfig ablate;
};

/// Throws ConfigError on unknown keys, wrong types or out-of-range values.
ExperimentConfig parse_experiment(const nlohmann::json& doc);

/// Reads the file, applies "dotted.key=value" overrides (value parsed as
/// JSON, falling back to a plain string) and validates. IoError when the
/// file cannot be read.
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides = {});

void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Canonical JSON with every default filled in. Parsing it yields the same
/// configuration.
nlohmann::json to_json(const ExperimentConfig& config);

std::string config_fingerprint(const ExperimentConfig& config);

/// Builds the problem, optionally replacing the toy codec trade-off.
std::unique_ptr<Problem> make_problem(const nlohmann::json& problem_section,
                                      std::optional<double> lambda_rd = std::nullopt);

std::string_view to_string(ChainMode mode);

}  // namespace balrd::cli
