#include <cmath>
#include <random>

#include "balrd/errors.hpp"
#include "balrd/optimizers.hpp"
#include "balrd/solution1.hpp"
#include "balrd/solution2.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace balrd;
using balrd::test::near;

namespace {

double objective(const GramMatrix& q, double wr) {
  const double wd = 1.0 - wr;
  return 0.5 * (q.q11 * wr * wr + 2.0 * q.q12 * wr * wd + q.q22 * wd * wd);
}

}  // namespace

TEST_CASE("gram examples") {
  const GramMatrix a = gram(GradPair{{1.0, 0.0}, {0.0, 1.0}});
  CHECK(a.q11 == 1.0);
  CHECK(a.q22 == 1.0);
  CHECK(a.q12 == 0.0);
  const GradPair par{{1.5, -2.0, 0.5}, {1.5, -2.0, 0.5}};
  const GramMatrix b = gram(par);
  CHECK(b.q11 == 6.5);
  CHECK(b.q22 == 6.5);
  CHECK(b.q12 == 6.5);
  const GramMatrix c = gram(GradPair{{3.0, 4.0}, {4.0, -3.0}});
  CHECK(c.q11 == 25.0);
  CHECK(c.q22 == 25.0);
  CHECK(c.q12 == 0.0);
}

TEST_CASE("gram satisfies Cauchy-Schwarz") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    GradPair g{std::vector<double>(6), std::vector<double>(6)};
    for (int i = 0; i < 6; ++i) {
      g.rate[i] = n(rng);
      g.distortion[i] = (t % 5 == 0) ? 2.0 * g.rate[i] : n(rng);
    }
    const GramMatrix q = gram(g);
    CHECK(q.q12 * q.q12 <= q.q11 * q.q22 * (1 + 1e-9));
  }
}

TEST_CASE("qp_weights examples") {
  const QpSolution a = qp_weights({1.0, 1.0, 0.0});
  CHECK(a.w_rate == 0.5);
  CHECK(a.w_distortion == 0.5);

  const QpSolution b = qp_weights({4.0, 1.0, 0.0});
  CHECK(near(b.w_rate, 0.2, 1e-15));
  CHECK(near(b.w_distortion, 0.8, 1e-15));
  double best = 1e300, best_w = 0;
  for (int i = 0; i <= 10000; ++i) {
    const double w = i * 1e-4;
    if (objective({4.0, 1.0, 0.0}, w) < best) {
      best = objective({4.0, 1.0, 0.0}, w);
      best_w = w;
    }
  }
  CHECK(near(best_w, 0.2, 1e-4));

  const QpSolution c = qp_weights({1.0, 1.0, 0.99});
  CHECK(near(c.w_rate + c.w_distortion, 1.0, 1e-15));
  CHECK(near(c.w_rate, 0.5, 1e-12));
}

TEST_CASE("qp_weights may return negative raw weights") {
  const QpSolution s = qp_weights({1.0, 4.0, 1.5});
  CHECK(s.w_distortion < 0.0);
  CHECK(near(s.w_rate + s.w_distortion, 1.0, 1e-15));
}

TEST_CASE("qp_weights rejects singular Gram matrices") {
  CHECK_THROWS_AS(qp_weights({2.0, 2.0, 2.0}), SingularGramError);
  CHECK_THROWS_AS(qp_weights({0.0, 1.0, 0.0}), SingularGramError);
}

TEST_CASE("qp_weights is stationary, feasible and scale invariant") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    GradPair g{std::vector<double>(4), std::vector<double>(4)};
    for (int i = 0; i < 4; ++i) {
      g.rate[i] = n(rng);
      g.distortion[i] = n(rng);
    }
    const GramMatrix q = gram(g);
    const QpSolution s = qp_weights(q);
    CHECK(std::abs(s.w_rate + s.w_distortion - 1.0) <= 1e-12);
    const double r1 = q.q11 * s.w_rate + q.q12 * s.w_distortion - s.kkt_lambda;
    const double r2 = q.q12 * s.w_rate + q.q22 * s.w_distortion - s.kkt_lambda;
    CHECK(std::hypot(r1, r2) <= 1e-9 * q.norm());

    const double c = 0.37;
    for (auto& v : g.rate) v *= c;
    for (auto& v : g.distortion) v *= c;
    const QpSolution scaled = qp_weights(gram(g));
    CHECK(near(scaled.w_rate, s.w_rate, 1e-12));
  }
}

TEST_CASE("project_simplex_softmax") {
  CHECK(project_simplex_softmax({0.5, 0.5}) == SimplexWeights::uniform());
  CHECK(project_simplex_softmax({-8.25, -8.25}) == SimplexWeights::uniform());
  const SimplexWeights w = project_simplex_softmax({1.5, -0.5});
  const double e2 = std::exp(2.0);
  CHECK(near(w.rate(), e2 / (e2 + 1.0), 1e-15));
  CHECK(near(w.distortion(), 1.0 / (e2 + 1.0), 1e-15));
}

TEST_CASE("solution2 falls back to uniform weights on parallel gradients") {
  ImbalancedQuadratic::Params p;
  p.scale_rate = 3.0;
  p.target_rate = ParamVector{1.0, 1.0};
  p.target_distortion = ParamVector{2.0, 2.0};
  const ImbalancedQuadratic q(p);
  // On the line through both targets the two gradients are parallel.
  PlainDescent rule(0.01);
  OverheadCounters c;
  const auto r = solution2_step(q, ParamVector{0.0, 0.0}, EvalContext{}, rule, {}, &c);
  CHECK(r.record.singular_fallback);
  CHECK(r.record.raw_weights->first == 0.5);
  CHECK(r.record.weights == SimplexWeights::uniform());
  CHECK(c.singular_fallbacks == 1);
}

TEST_CASE("solution2 matches solution1 with uniform logits on orthogonal equal-norm log-gradients") {
  ImbalancedQuadratic::Params p;
  p.scale_rate = 1.0;
  p.scale_distortion = 1.0;
  p.target_rate = ParamVector{1.0, 0.0};
  p.target_distortion = ParamVector{0.0, 1.0};
  const ImbalancedQuadratic q(p);
  const ParamVector theta{0.0, 0.0};  // gradients (-2,0) and (0,-2), equal losses
  const auto r2 = solution2_step(q, theta, EvalContext{}, 0.1);
  const auto r1 = solution1_step(q, theta, {}, EvalContext{}, 0.1);
  CHECK(r2.record.weights == SimplexWeights::uniform());
  CHECK(r2.theta == r1.theta);
}

TEST_CASE("solution2 keeps uniform weights on the symmetric problem and counts one pass") {
  const auto q = balrd::test::symmetric_quadratic();
  ParamVector theta = q.initial_point(0);
  PlainDescent rule(0.05);
  OverheadCounters c;
  for (int t = 0; t < 20; ++t) {
    const auto r = solution2_step(q, theta, EvalContext{}, rule, {}, &c);
    CHECK(r.record.weights == SimplexWeights::uniform());
    theta = r.theta;
  }
  CHECK(c.loss_evals == 20);
  CHECK(c.grad_evals == 20);
  CHECK(c.gram_builds == 20);
  CHECK(c.logit_updates == 0);
}
