#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "balrd/core.hpp"

namespace balrd {

/// A batch of square image patches, row-major, pixel values in [0, 1].
struct DataBatch {
  std::size_t patch_size = 0;
  std::size_t count = 0;
  std::vector<double> pixels;  // count * patch_size^2

  std::size_t pixels_per_patch() const { return patch_size * patch_size; }
  std::span<const double> patch(std::size_t i) const {
    const std::size_t n = pixels_per_patch();
    return std::span<const double>(pixels).subspan(i * n, n);
  }
  bool empty() const { return count == 0; }
};

/// Everything besides theta that an evaluation depends on. Two evaluations
/// with the same context see the same data and the same noise draw.
struct EvalContext {
  const DataBatch* batch = nullptr;
  std::uint64_t noise_counter = 0;
};

struct Evaluation {
  LossPair losses;
  GradPair grads;
};

/// Differentiable two-objective problem. Implementations are immutable after
/// construction, so one instance may be evaluated from several threads.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;

  virtual LossPair losses(const ParamVector& theta, const EvalContext& ctx) const = 0;
  /// Losses and analytic gradients of both objectives.
  virtual Evaluation evaluate(const ParamVector& theta, const EvalContext& ctx) const = 0;
  GradPair gradients(const ParamVector& theta, const EvalContext& ctx) const {
    return evaluate(theta, ctx).grads;
  }

  virtual ParamVector initial_point(std::uint64_t seed) const = 0;

  /// Training batches for one epoch. Problems without data return `count`
  /// empty batches.
  virtual std::vector<DataBatch> training_batches(std::size_t count, std::uint64_t seed) const;
  /// Held-out batch used for final evaluation.
  virtual DataBatch evaluation_batch(std::uint64_t seed) const;

 protected:
  /// Throws ShapeError on dimension mismatch and NumericError on nonfinite
  /// entries.
  void check_theta(const ParamVector& theta) const;
};

/// L_i(theta) = scale_i * |theta - target_i|^2 + floor
class ImbalancedQuadratic final : public Problem {
 public:
  struct Params {
    double scale_rate = 1.0;
    double scale_distortion = 1.0;
    ParamVector target_rate;
    ParamVector target_distortion;
    double floor = 1.0;
    std::optional<ParamVector> init;
  };

  explicit ImbalancedQuadratic(Params params);

  /// Random instance: Gaussian targets, rate scale `scale_ratio` times the
  /// distortion scale, random start point.
  static ImbalancedQuadratic random(std::size_t dim, double scale_ratio, std::uint64_t seed,
                                    double floor = 1.0);

  std::string name() const override { return "imbalanced_quadratic"; }
  std::size_t dim() const override { return params_.target_rate.size(); }
  LossPair losses(const ParamVector& theta, const EvalContext& ctx) const override;
  Evaluation evaluate(const ParamVector& theta, const EvalContext& ctx) const override;
  ParamVector initial_point(std::uint64_t seed) const override;

  const Params& params() const { return params_; }
  /// True when the two targets differ, i.e. the objectives conflict.
  bool conflicting() const { return params_.target_rate != params_.target_distortion; }

 private:
  Params params_;
};

/// Parameters of the seeded smooth-noise patch synthesizer.
struct PatchSynthesizer {
  int waves = 3;
  double min_amplitude = 0.05;
  double max_amplitude = 0.25;
  double max_frequency = 0.5;  // cycles per patch
  double min_offset = 0.3;
  double max_offset = 0.7;
};

/// Deterministic batch of synthetic patches: an offset plus a few random
/// low-frequency sinusoids, clamped to [0, 1].
DataBatch make_patch_batch(const PatchSynthesizer& source, std::size_t count,
                           std::size_t patch_size, std::uint64_t seed);

/// Central finite differences of both losses. The context (and therefore the
/// noise draw) is held fixed across the +/- evaluations.
GradPair fd_oracle(const Problem& problem, const ParamVector& theta, const EvalContext& ctx,
                   double step);

/// |a - b| / max(|a|, |b|) in the Euclidean norm, 0 when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

/// FNV-1a 64-bit hash rendered as 16 hex digits.
std::string fingerprint_hex(std::string_view text);

/// Structural fingerprint: problem name and dimension. Checkpoints stay
/// compatible across trade-off values of the same problem.
std::string problem_fingerprint(const Problem& problem);

}  // namespace balrd
