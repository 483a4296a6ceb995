#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "balrd/cli/config.hpp"
#include "balrd/trainer.hpp"

namespace balrd::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitDiverged = 3,
  kExitIoError = 4,
};

/// Header of trace.csv. Preceded by the version line "# balrd-trace v1".
inline constexpr const char* kTraceCsvHeader = "iteration,L_R,L_D,w_R,w_D,s_R,s_D,d_norm,alpha";
inline constexpr int kTraceCsvVersion = 1;

/// Environment variable that overrides the output root (below --out).
inline constexpr const char* kOutputRootEnv = "BALRD_OUTPUT_ROOT";

struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::vector<std::string> sets;
};

int cmd_train(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommonOptions& opts, std::ostream& out, std::ostream& err);
int cmd_bdrate(const std::filesystem::path& anchor, const std::filesystem::path& test,
               std::ostream& out, std::ostream& err);
/// preset: renorm_off, gamma_sweep or cross_validation.
int cmd_ablate(const std::string& preset, const CommonOptions& opts, std::ostream& out,
               std::ostream& err);
int cmd_validate_config(const CommonOptions& opts, std::ostream& out, std::ostream& err);

/// Logit decays of the gamma ablation, in run order.
inline const std::vector<double> kGammaSweep{0.01, 0.015, 0.005, 0.001, 0.0005, 0.0};

// Artifact writers, exposed for tests.
std::string format_number(double v);
void write_trace_csv(const std::vector<TraceRecord>& trace, const std::filesystem::path& path);
void write_diagnostics_csv(const std::vector<TraceRecord>& trace,
                           const std::filesystem::path& path);

/// Non-convergence test used by the ablations: the run aborted on a
/// nonfinite value, or the mean epoch loss over its final window (a tenth of
/// the epochs) sits more than `threshold` (relative) above the best mean over
/// any window of that width.
bool is_divergent(const TrainResult& result, double threshold);

}  // namespace balrd::cli
