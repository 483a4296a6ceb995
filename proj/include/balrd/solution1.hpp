#pragma once

#include <array>

#include "balrd/core.hpp"
#include "balrd/optimizers.hpp"
#include "balrd/problems.hpp"

namespace balrd {

/// Softmax logits of the trajectory method plus their step size and decay.
struct TrajectoryState {
  static constexpr double kDefaultBeta = 0.025;
  static constexpr double kDefaultGamma = 0.001;

  std::array<double, 2> xi{0.0, 0.0};
  double beta = kDefaultBeta;
  double gamma = kDefaultGamma;

  /// Throws NumericError on nonfinite logits, beta <= 0 or gamma < 0.
  void validate() const;
};

/// Two-way softmax with max subtraction. Always strictly interior for finite
/// logits.
SimplexWeights softmax2(double a, double b);

SimplexWeights weights_of(const TrajectoryState& state);

/// Jacobian of softmax at w: diag(w) - w w^T. Symmetric, rows sum to zero.
std::array<std::array<double, 2>, 2> softmax_jacobian(const SimplexWeights& w);

/// Per-objective drop of log(1 + L) between two loss pairs.
std::array<double, 2> shifted_log_drop(const LossPair& prev, const LossPair& next);

/// delta = S(w)^T * drop
std::array<double, 2> logit_gradient(const SimplexWeights& w, const std::array<double, 2>& drop);

/// xi <- xi - beta * (delta + gamma * xi), with delta taken at the
/// pre-update weights softmax(xi).
TrajectoryState logit_update(const TrajectoryState& state, const LossPair& prev,
                             const LossPair& next);

struct Solution1Result {
  ParamVector theta;
  TrajectoryState state;
  TraceRecord record;   // iteration and speeds are left for the caller
  LossPair next_losses; // second forward pass, same context
};

/// One iteration of the trajectory method: evaluate, balance with the
/// current logits, step through `rule`, re-evaluate on the same context and
/// update the logits.
Solution1Result solution1_step(const Problem& problem, const ParamVector& theta,
                               const TrajectoryState& state, const EvalContext& ctx,
                               UpdateRule& rule, const BalanceOptions& options = {},
                               OverheadCounters* counters = nullptr);

/// Same with plain descent at `step_size`.
Solution1Result solution1_step(const Problem& problem, const ParamVector& theta,
                               const TrajectoryState& state, const EvalContext& ctx,
                               double step_size);

}  // namespace balrd
