#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "balrd/core.hpp"
#include "balrd/problems.hpp"
#include "balrd/solution1.hpp"

namespace balrd {

enum class Mode { kStandard, kSolution1, kSolution2 };
enum class BaseRule { kPlainDescent, kAdaptiveMoments };

std::string_view to_string(Mode mode);
std::string_view to_string(BaseRule rule);
/// Throws ConfigError on unknown names.
Mode parse_mode(std::string_view name);
BaseRule parse_base_rule(std::string_view name);

struct SchedulerConfig {
  bool enabled = false;  // false: constant step size
  int patience = 10;
  double factor = 0.5;
  double threshold = 1e-4;
};

/// Defaults follow the reference training protocol: adaptive moments with
/// (0.9, 0.999), step 1e-4, plateau patience 10 / factor 0.5, logit step
/// 0.025 and decay 0.001.
struct TrainConfig {
  Mode mode = Mode::kStandard;
  BaseRule base_rule = BaseRule::kAdaptiveMoments;
  double step_size = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 1;
  int batches_per_epoch = 1;
  SchedulerConfig scheduler;
  std::uint64_t seed = 0;
  TrajectoryState solution1;
  BalanceOptions balance;
  std::optional<std::string> fine_tune_from;
  /// Noise draws averaged in the final held-out evaluation.
  int eval_draws = 4;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Preset for fine-tuning a trained model: closed-form QP balancing, half the
/// step size, a quarter of the epochs (at least one).
TrainConfig fine_tune_preset(const TrainConfig& base);

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ParamVector theta;
  std::optional<TrajectoryState> trajectory;
  int epoch = 0;
  std::string fingerprint;
};

/// Textual (JSON) container. Doubles round-trip exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws IoError when unreadable or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

enum class RunStatus { kCompleted, kDiverged };

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TraceRecord> trace;
  OverheadCounters counters;
  RunStatus status = RunStatus::kCompleted;
  std::optional<std::uint64_t> failed_iteration;
  std::string failure;
  std::vector<double> epoch_losses;   // epoch mean of L_R + L_D
  std::optional<LossPair> final_eval; // held-out evaluation at the final theta
};

/// Trains from the problem's initial point for config.seed.
TrainResult train(const Problem& problem, const TrainConfig& config);

/// Resumes theta (and logits, when present and the mode uses them) from a
/// checkpoint. Throws ConfigError on fingerprint mismatch. With zero epochs
/// the checkpoint is returned unchanged.
TrainResult fine_tune(const Checkpoint& checkpoint, const Problem& problem,
                      const TrainConfig& config);

/// Mean held-out losses at theta over `draws` noise draws.
LossPair evaluate_holdout(const Problem& problem, const ParamVector& theta, std::uint64_t seed,
                          int draws);

}  // namespace balrd
