#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "balrd/errors.hpp"

namespace balrd {

/// Rate and distortion losses at one iteration. Both must be strictly
/// positive and finite before they reach the balance math.
struct LossPair {
  double rate = 0.0;
  double distortion = 0.0;

  double total() const { return rate + distortion; }
  friend bool operator==(const LossPair&, const LossPair&) = default;
};

/// Flat parameter vector. Structured problems flatten their parameters in
/// declaration order.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool all_finite() const;

  /// theta - scale * direction
  ParamVector stepped(std::span<const double> direction, double scale) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

/// Gradients of both objectives over the same parameter space (the two rows
/// of the Jacobian).
struct GradPair {
  std::vector<double> rate;
  std::vector<double> distortion;

  std::size_t dim() const { return rate.size(); }
};

/// Point of the 2-simplex: both weights nonnegative, summing to one.
class SimplexWeights {
 public:
  static constexpr double kSumTolerance = 1e-12;

  SimplexWeights() = default;
  /// Throws NumericError unless the pair lies on the simplex.
  SimplexWeights(double w_rate, double w_distortion);

  static SimplexWeights uniform() { return {0.5, 0.5}; }

  double rate() const { return w_rate_; }
  double distortion() const { return w_distortion_; }

  friend bool operator==(const SimplexWeights&, const SimplexWeights&) = default;

 private:
  double w_rate_ = 0.5;
  double w_distortion_ = 0.5;
};

/// Relative per-objective loss decrease over one step.
struct SpeedPair {
  double rate = 0.0;
  double distortion = 0.0;
};

/// One line of the training trace.
struct TraceRecord {
  std::uint64_t iteration = 0;
  LossPair losses;
  SimplexWeights weights;
  SpeedPair speeds;
  double direction_norm = 0.0;
  double step_size = 0.0;

  // Diagnostics, not part of the stable trace columns.
  double renorm = 1.0;
  std::optional<std::pair<double, double>> raw_weights;
  std::optional<double> kkt_lambda;
  bool singular_fallback = false;
};

// ---------------------------------------------------------------------------
// Balanced-direction machinery. All functions are pure and validate their
// inputs eagerly.

/// Throws NumericError unless both losses are finite and > 0.
void require_positive(const LossPair& losses);

/// Throws ShapeError/NumericError on mismatched lengths or nonfinite entries.
void require_consistent(const GradPair& grads);

/// grad / loss for both objectives (gradient of log L, no shift).
GradPair log_gradients(const LossPair& losses, const GradPair& grads);

/// c = (w_R / L_R + w_D / L_D)^-1
double renorm_constant(const SimplexWeights& weights, const LossPair& losses);

/// Coefficients (a_R, a_D) such that the balanced direction equals
/// a_R * grad_R + a_D * grad_D on the raw gradients. With renormalization
/// they sum to one.
std::pair<double, double> raw_gradient_coefficients(const SimplexWeights& weights,
                                                    const LossPair& losses,
                                                    bool renormalize = true);

/// d = c * (w_R * grad log L_R + w_D * grad log L_D). With
/// renormalize=false the constant c is replaced by 1.
std::vector<double> balanced_direction(const SimplexWeights& weights, const LossPair& losses,
                                       const GradPair& grads, bool renormalize = true);

/// s_i = (prev_i - next_i) / prev_i on raw losses.
SpeedPair improvement_speed(const LossPair& prev, const LossPair& next);

// Small vector helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
bool all_finite(std::span<const double> a);

}  // namespace balrd

namespace balrd {

/// Instrumentation for per-step overhead accounting.
struct OverheadCounters {
  std::uint64_t iterations = 0;
  std::uint64_t loss_evals = 0;   // forward passes
  std::uint64_t grad_evals = 0;   // backward passes
  std::uint64_t balance_calls = 0;
  std::uint64_t gram_builds = 0;
  std::uint64_t logit_updates = 0;
  std::uint64_t singular_fallbacks = 0;

  OverheadCounters& operator+=(const OverheadCounters& o);
};

struct BalanceOptions {
  /// false replaces the renormalization constant by 1 (ablation).
  bool renormalize = true;
};

}  // namespace balrd
