#include "balrd/core.hpp"

#include <cmath>
#include <string>

namespace balrd {

bool ParamVector::all_finite() const { return balrd::all_finite(values_); }

ParamVector ParamVector::stepped(std::span<const double> direction, double scale) const {
  if (direction.size() != values_.size()) {
    throw ShapeError("step direction has length " + std::to_string(direction.size()) +
                     ", parameters have " + std::to_string(values_.size()));
  }
  ParamVector out(*this);
  for (std::size_t i = 0; i < values_.size(); ++i) out.values_[i] -= scale * direction[i];
  return out;
}

SimplexWeights::SimplexWeights(double w_rate, double w_distortion)
    : w_rate_(w_rate), w_distortion_(w_distortion) {
  if (!std::isfinite(w_rate) || !std::isfinite(w_distortion) || w_rate < 0.0 ||
      w_distortion < 0.0 || std::abs(w_rate + w_distortion - 1.0) > kSumTolerance) {
    throw NumericError("weights (" + std::to_string(w_rate) + ", " +
                       std::to_string(w_distortion) + ") are not on the simplex");
  }
}

void require_positive(const LossPair& losses) {
  if (!(std::isfinite(losses.rate) && losses.rate > 0.0)) {
    throw NumericError("rate loss must be positive and finite, got " + std::to_string(losses.rate));
  }
  if (!(std::isfinite(losses.distortion) && losses.distortion > 0.0)) {
    throw NumericError("distortion loss must be positive and finite, got " +
                       std::to_string(losses.distortion));
  }
}

void require_consistent(const GradPair& grads) {
  if (grads.rate.size() != grads.distortion.size()) {
    throw ShapeError("gradient lengths differ: " + std::to_string(grads.rate.size()) + " vs " +
                     std::to_string(grads.distortion.size()));
  }
  if (!all_finite(grads.rate) || !all_finite(grads.distortion)) {
    throw NumericError("nonfinite gradient entry");
  }
}

GradPair log_gradients(const LossPair& losses, const GradPair& grads) {
  require_positive(losses);
  require_consistent(grads);
  GradPair out{grads.rate, grads.distortion};
  for (double& g : out.rate) g /= losses.rate;
  for (double& g : out.distortion) g /= losses.distortion;
  return out;
}

double renorm_constant(const SimplexWeights& weights, const LossPair& losses) {
  require_positive(losses);
  return 1.0 / (weights.rate() / losses.rate + weights.distortion() / losses.distortion);
}

std::pair<double, double> raw_gradient_coefficients(const SimplexWeights& weights,
                                                    const LossPair& losses, bool renormalize) {
  require_positive(losses);
  const double a_rate = weights.rate() / losses.rate;
  const double a_dist = weights.distortion() / losses.distortion;
  if (!renormalize) return {a_rate, a_dist};
  // Dividing by the sum (instead of multiplying by c) keeps a degenerate
  // weight pair exact: (1, 0) yields coefficients (1, 0).
  const double sum = a_rate + a_dist;
  return {a_rate / sum, a_dist / sum};
}

std::vector<double> balanced_direction(const SimplexWeights& weights, const LossPair& losses,
                                       const GradPair& grads, bool renormalize) {
  require_consistent(grads);
  const auto [a_rate, a_dist] = raw_gradient_coefficients(weights, losses, renormalize);
  std::vector<double> d(grads.dim());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = a_rate * grads.rate[i] + a_dist * grads.distortion[i];
  }
  return d;
}

SpeedPair improvement_speed(const LossPair& prev, const LossPair& next) {
  require_positive(prev);
  if (!std::isfinite(next.rate) || !std::isfinite(next.distortion)) {
    throw NumericError("nonfinite loss after step");
  }
  return {(prev.rate - next.rate) / prev.rate,
          (prev.distortion - next.distortion) / prev.distortion};
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace balrd

namespace balrd {

OverheadCounters& OverheadCounters::operator+=(const OverheadCounters& o) {
  iterations += o.iterations;
  loss_evals += o.loss_evals;
  grad_evals += o.grad_evals;
  balance_calls += o.balance_calls;
  gram_builds += o.gram_builds;
  logit_updates += o.logit_updates;
  singular_fallbacks += o.singular_fallbacks;
  return *this;
}

}  // namespace balrd
