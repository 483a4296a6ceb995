#include "balrd/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace balrd {

PlainDescent::PlainDescent(double alpha) : alpha_(0.0) { set_step_size(alpha); }

void PlainDescent::set_step_size(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ShapeError("step size must be positive");
  alpha_ = alpha;
}

ParamVector PlainDescent::apply(const ParamVector& theta, std::span<const double> direction) {
  return theta.stepped(direction, alpha_);
}

AdaptiveMoments::AdaptiveMoments(double alpha, double beta1, double beta2, double epsilon)
    : alpha_(0.0), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  set_step_size(alpha);
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ShapeError("moment decays must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ShapeError("epsilon must be positive");
}

void AdaptiveMoments::set_step_size(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ShapeError("step size must be positive");
  alpha_ = alpha;
}

ParamVector AdaptiveMoments::apply(const ParamVector& theta, std::span<const double> direction) {
  if (direction.size() != theta.size()) throw ShapeError("direction length mismatch");
  if (first_.empty()) {
    first_.assign(theta.size(), 0.0);
    second_.assign(theta.size(), 0.0);
  }
  ++count_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(count_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(count_));
  ParamVector out(theta);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = direction[i];
    first_[i] = beta1_ * first_[i] + (1.0 - beta1_) * g;
    second_[i] = beta2_ * second_[i] + (1.0 - beta2_) * g * g;
    const double m_hat = first_[i] / bias1;
    const double v_hat = second_[i] / bias2;
    out[i] -= alpha_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
  return out;
}

PlateauScheduler::PlateauScheduler(int patience, double factor, double threshold, double min_step)
    : patience_(patience),
      factor_(factor),
      threshold_(threshold),
      min_step_(min_step),
      best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw ShapeError("scheduler patience must be >= 1");
  if (!(factor > 0.0 && factor < 1.0)) throw ShapeError("scheduler factor must lie in (0, 1)");
}

double PlateauScheduler::step(double metric, double current_step) {
  // Relative threshold, minimization.
  if (metric < best_ * (1.0 - threshold_)) {
    best_ = metric;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ > patience_) {
    bad_epochs_ = 0;
    return std::max(current_step * factor_, min_step_);
  }
  return current_step;
}

}  // namespace balrd
