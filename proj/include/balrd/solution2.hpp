#pragma once

#include <utility>

#include "balrd/core.hpp"
#include "balrd/optimizers.hpp"
#include "balrd/problems.hpp"

namespace balrd {

/// Gram matrix of the two log-gradients (upper triangle).
struct GramMatrix {
  double q11 = 0.0;  // |grad log L_R|^2
  double q22 = 0.0;  // |grad log L_D|^2
  double q12 = 0.0;  // <grad log L_R, grad log L_D>

  double det() const { return q11 * q22 - q12 * q12; }
  /// Frobenius norm.
  double norm() const;
  /// Relative singularity threshold 1e-12 * q11 * q22.
  double singular_threshold() const { return 1e-12 * q11 * q22; }
};

GramMatrix gram(const GradPair& log_grads);

/// Closed-form minimizer of 1/2 w^T Q w subject to w_R + w_D = 1, with the
/// equality multiplier. Components may be negative.
struct QpSolution {
  double w_rate = 0.5;
  double w_distortion = 0.5;
  double kkt_lambda = 0.0;
};

/// Throws SingularGramError when det(Q) <= 1e-12 * q11 * q22.
QpSolution qp_weights(const GramMatrix& q);

/// softmax(raw), applied unconditionally.
SimplexWeights project_simplex_softmax(std::pair<double, double> raw);

struct Solution2Result {
  ParamVector theta;
  TraceRecord record;  // iteration and speeds are left for the caller
};

/// One iteration of the closed-form QP method. A singular Gram matrix falls
/// back to raw weights (0.5, 0.5) and flags the record.
Solution2Result solution2_step(const Problem& problem, const ParamVector& theta,
                               const EvalContext& ctx, UpdateRule& rule,
                               const BalanceOptions& options = {},
                               OverheadCounters* counters = nullptr);

Solution2Result solution2_step(const Problem& problem, const ParamVector& theta,
                               const EvalContext& ctx, double step_size);

}  // namespace balrd
