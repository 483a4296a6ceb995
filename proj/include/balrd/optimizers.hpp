#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "balrd/core.hpp"

namespace balrd {

/// Base parameter-update rule. The balancing modes hand their direction to a
/// rule as if it were the gradient.
class UpdateRule {
 public:
  virtual ~UpdateRule() = default;
  virtual ParamVector apply(const ParamVector& theta, std::span<const double> direction) = 0;
  virtual double step_size() const = 0;
  virtual void set_step_size(double alpha) = 0;
};

/// theta <- theta - alpha * d
class PlainDescent final : public UpdateRule {
 public:
  explicit PlainDescent(double alpha);
  ParamVector apply(const ParamVector& theta, std::span<const double> direction) override;
  double step_size() const override { return alpha_; }
  void set_step_size(double alpha) override;

 private:
  double alpha_;
};

/// First/second moment accumulation with bias correction (Adam).
class AdaptiveMoments final : public UpdateRule {
 public:
  AdaptiveMoments(double alpha, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  ParamVector apply(const ParamVector& theta, std::span<const double> direction) override;
  double step_size() const override { return alpha_; }
  void set_step_size(double alpha) override;
  std::uint64_t steps() const { return count_; }

 private:
  double alpha_, beta1_, beta2_, eps_;
  std::uint64_t count_ = 0;
  std::vector<double> first_, second_;
};

/// Reduce-on-plateau schedule on a minimized metric. After more than
/// `patience` consecutive epochs without relative improvement beyond
/// `threshold`, the step size is multiplied by `factor` and the counter
/// restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(int patience, double factor, double threshold = 1e-4, double min_step = 0.0);

  /// Feeds one epoch's metric; returns the (possibly reduced) step size.
  double step(double metric, double current_step);

  int bad_epochs() const { return bad_epochs_; }
  double best() const { return best_; }

 private:
  int patience_;
  double factor_, threshold_, min_step_;
  double best_;
  int bad_epochs_ = 0;
};

}  // namespace balrd
