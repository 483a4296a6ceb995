#include "balrd/solution1.hpp"

#include <algorithm>
#include <cmath>

namespace balrd {

void TrajectoryState::validate() const {
  if (!std::isfinite(xi[0]) || !std::isfinite(xi[1])) throw NumericError("nonfinite logits");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw NumericError("logit step size must be > 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw NumericError("logit decay must be >= 0");
}

SimplexWeights softmax2(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw NumericError("softmax of nonfinite input");
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  const double s = ea + eb;
  // Complementary form keeps the pair summing to one to the last bit.
  if (ea <= eb) {
    const double wa = ea / s;
    return {wa, 1.0 - wa};
  }
  const double wb = eb / s;
  return {1.0 - wb, wb};
}

SimplexWeights weights_of(const TrajectoryState& state) {
  state.validate();
  return softmax2(state.xi[0], state.xi[1]);
}

std::array<std::array<double, 2>, 2> softmax_jacobian(const SimplexWeights& w) {
  const double r = w.rate();
  const double d = w.distortion();
  return {{{r * (1.0 - r), -r * d}, {-d * r, d * (1.0 - d)}}};
}

std::array<double, 2> shifted_log_drop(const LossPair& prev, const LossPair& next) {
  require_positive(prev);
  require_positive(next);
  const std::array<double, 2> drop{std::log1p(prev.rate) - std::log1p(next.rate),
                                   std::log1p(prev.distortion) - std::log1p(next.distortion)};
  if (!std::isfinite(drop[0]) || !std::isfinite(drop[1])) {
    throw NumericError("nonfinite log-loss difference");
  }
  return drop;
}

std::array<double, 2> logit_gradient(const SimplexWeights& w, const std::array<double, 2>& drop) {
  const auto s = softmax_jacobian(w);
  return {s[0][0] * drop[0] + s[1][0] * drop[1], s[0][1] * drop[0] + s[1][1] * drop[1]};
}

TrajectoryState logit_update(const TrajectoryState& state, const LossPair& prev,
                             const LossPair& next) {
  const SimplexWeights w = weights_of(state);
  const auto delta = logit_gradient(w, shifted_log_drop(prev, next));
  TrajectoryState out = state;
  for (int i = 0; i < 2; ++i) {
    out.xi[i] = state.xi[i] - state.beta * (delta[i] + state.gamma * state.xi[i]);
  }
  out.validate();
  return out;
}

Solution1Result solution1_step(const Problem& problem, const ParamVector& theta,
                               const TrajectoryState& state, const EvalContext& ctx,
                               UpdateRule& rule, const BalanceOptions& options,
                               OverheadCounters* counters) {
  const SimplexWeights w = weights_of(state);
  const Evaluation ev = problem.evaluate(theta, ctx);
  require_positive(ev.losses);
  const auto direction = balanced_direction(w, ev.losses, ev.grads, options.renormalize);

  Solution1Result out;
  out.theta = rule.apply(theta, direction);
  out.next_losses = problem.losses(out.theta, ctx);
  out.state = logit_update(state, ev.losses, out.next_losses);

  out.record.losses = ev.losses;
  out.record.weights = w;
  out.record.direction_norm = norm(direction);
  out.record.step_size = rule.step_size();
  out.record.renorm = options.renormalize ? renorm_constant(w, ev.losses) : 1.0;

  if (counters != nullptr) {
    counters->loss_evals += 2;
    counters->grad_evals += 1;
    counters->balance_calls += 1;
    counters->logit_updates += 1;
  }
  return out;
}

Solution1Result solution1_step(const Problem& problem, const ParamVector& theta,
                               const TrajectoryState& state, const EvalContext& ctx,
                               double step_size) {
  PlainDescent rule(step_size);
  return solution1_step(problem, theta, state, ctx, rule);
}

}  // namespace balrd
