#include "balrd/solution2.hpp"

#include <cmath>

#include "balrd/solution1.hpp"

namespace balrd {

double GramMatrix::norm() const { return std::sqrt(q11 * q11 + q22 * q22 + 2.0 * q12 * q12); }

GramMatrix gram(const GradPair& log_grads) {
  require_consistent(log_grads);
  return {dot(log_grads.rate, log_grads.rate), dot(log_grads.distortion, log_grads.distortion),
          dot(log_grads.rate, log_grads.distortion)};
}

QpSolution qp_weights(const GramMatrix& q) {
  const double det = q.det();
  const double threshold = q.singular_threshold();
  if (!(det > threshold)) throw SingularGramError(det, threshold);
  // Adjugate: Q^-1 1 = (q22 - q12, q11 - q12) / det.
  const double a = q.q22 - q.q12;
  const double b = q.q11 - q.q12;
  const double sum = a + b;
  QpSolution s;
  s.w_rate = a / sum;
  s.w_distortion = b / sum;
  s.kkt_lambda = det / sum;
  return s;
}

SimplexWeights project_simplex_softmax(std::pair<double, double> raw) {
  return softmax2(raw.first, raw.second);
}

Solution2Result solution2_step(const Problem& problem, const ParamVector& theta,
                               const EvalContext& ctx, UpdateRule& rule,
                               const BalanceOptions& options, OverheadCounters* counters) {
  const Evaluation ev = problem.evaluate(theta, ctx);
  const GradPair log_grads = log_gradients(ev.losses, ev.grads);
  const GramMatrix q = gram(log_grads);

  Solution2Result out;
  std::pair<double, double> raw{0.5, 0.5};
  try {
    const QpSolution sol = qp_weights(q);
    raw = {sol.w_rate, sol.w_distortion};
    out.record.kkt_lambda = sol.kkt_lambda;
  } catch (const SingularGramError&) {
    out.record.singular_fallback = true;
  }
  const SimplexWeights w = project_simplex_softmax(raw);
  const auto direction = balanced_direction(w, ev.losses, ev.grads, options.renormalize);
  out.theta = rule.apply(theta, direction);

  out.record.losses = ev.losses;
  out.record.weights = w;
  out.record.raw_weights = raw;
  out.record.direction_norm = norm(direction);
  out.record.step_size = rule.step_size();
  out.record.renorm = options.renormalize ? renorm_constant(w, ev.losses) : 1.0;

  if (counters != nullptr) {
    counters->loss_evals += 1;
    counters->grad_evals += 1;
    counters->gram_builds += 1;
    counters->balance_calls += 1;
    if (out.record.singular_fallback) counters->singular_fallbacks += 1;
  }
  return out;
}

Solution2Result solution2_step(const Problem& problem, const ParamVector& theta,
                               const EvalContext& ctx, double step_size) {
  PlainDescent rule(step_size);
  return solution2_step(problem, theta, ctx, rule);
}

}  // namespace balrd
