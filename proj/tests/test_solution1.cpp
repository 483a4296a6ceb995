#include <cmath>
#include <numbers>
#include <random>

#include "balrd/errors.hpp"
#include "balrd/optimizers.hpp"
#include "balrd/solution1.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace balrd;
using balrd::test::near;

TEST_CASE("weights_of is a softmax of the logits") {
  CHECK(weights_of({}) == SimplexWeights::uniform());
  for (double a : {-700.0, -3.0, 0.0, 12.5, 900.0}) {
    TrajectoryState s;
    s.xi = {a, a};
    CHECK(weights_of(s) == SimplexWeights::uniform());
  }
  TrajectoryState s;
  s.xi = {std::log(3.0), 0.0};
  CHECK(near(weights_of(s).rate(), 0.75, 1e-15));
  CHECK(near(weights_of(s).distortion(), 0.25, 1e-15));
}

TEST_CASE("softmax weights stay interior and finite for extreme logits") {
  for (double gap : {-1000.0, -40.0, -1.0, 0.5, 30.0, 1000.0}) {
    const SimplexWeights w = softmax2(gap, 0.0);
    CHECK(std::isfinite(w.rate()));
    CHECK(w.rate() >= 0.0);
    CHECK(w.distortion() >= 0.0);
    CHECK(std::abs(w.rate() + w.distortion() - 1.0) <= 1e-12);
    if (std::abs(gap) < 30.0) {
      CHECK(w.rate() > 0.0);
      CHECK(w.distortion() > 0.0);
    }
  }
}

TEST_CASE("softmax Jacobian matches finite differences") {
  for (double a : {-2.0, 0.0, 0.7}) {
    const SimplexWeights w = softmax2(a, 0.3);
    const auto jac = softmax_jacobian(w);
    const double h = 1e-6;
    const SimplexWeights up = softmax2(a + h, 0.3), dn = softmax2(a - h, 0.3);
    CHECK(near(jac[0][0], (up.rate() - dn.rate()) / (2 * h), 1e-8));
    CHECK(near(jac[1][0], (up.distortion() - dn.distortion()) / (2 * h), 1e-8));
    CHECK(near(jac[0][0] + jac[0][1], 0.0, 1e-15));
  }
  const auto at_uniform = softmax_jacobian(SimplexWeights::uniform());
  CHECK(at_uniform[0][0] == 0.25);
  CHECK(at_uniform[0][1] == -0.25);
}

TEST_CASE("logit_update examples") {
  TrajectoryState s;
  s.gamma = 0.0;
  // Equal log-drops: no reweighting.
  const TrajectoryState same = logit_update(s, {2.0, 5.0}, {1.0, 3.0});
  CHECK(std::abs(same.xi[0]) <= 1e-15);
  CHECK(std::abs(same.xi[1]) <= 1e-15);

  // Delta = (0.2, 0) with beta = 1, gamma = 0.
  TrajectoryState unit;
  unit.beta = 1.0;
  unit.gamma = 0.0;
  const double r0 = 3.0;
  const double r1 = (1.0 + r0) * std::exp(-0.2) - 1.0;
  const TrajectoryState moved = logit_update(unit, {r0, 1.0}, {r1, 1.0});
  CHECK(near(moved.xi[0], -0.05, 1e-12));
  CHECK(near(moved.xi[1], 0.05, 1e-12));
  CHECK(weights_of(moved).distortion() > 0.5);

  // Pure decay.
  TrajectoryState decay;
  decay.xi = {1.0, -1.0};
  const TrajectoryState d = logit_update(decay, {1.0, 1.0}, {1.0, 1.0});
  CHECK(near(d.xi[0], 1.0 * (1.0 - 0.025 * 0.001), 1e-15));
  CHECK(near(d.xi[1], -1.0 * (1.0 - 0.025 * 0.001), 1e-15));
}

TEST_CASE("logit_update contracts geometrically and keeps delta zero-sum") {
  TrajectoryState s;
  s.xi = {2.0, -0.5};
  s.beta = 0.1;
  s.gamma = 0.2;
  for (int t = 0; t < 10; ++t) {
    const auto before = s.xi;
    s = logit_update(s, {1.0, 1.0}, {1.0, 1.0});
    CHECK(near(s.xi[0], before[0] * (1.0 - 0.02), 1e-15));
    CHECK(near(s.xi[1], before[1] * (1.0 - 0.02), 1e-15));
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int t = 0; t < 200; ++t) {
    const SimplexWeights w = softmax2(u(rng) - 2.5, 0.0);
    const auto drop = shifted_log_drop({u(rng), u(rng)}, {u(rng), u(rng)});
    const auto delta = logit_gradient(w, drop);
    CHECK(std::abs(delta[0] + delta[1]) <= 1e-15);
  }
}

TEST_CASE("logit_update rejects nonfinite drops and invalid states") {
  const TrajectoryState s;
  CHECK_THROWS_AS(logit_update(s, {1.0, 1.0}, {std::nan(""), 1.0}), NumericError);
  TrajectoryState bad;
  bad.beta = 0.0;
  CHECK_THROWS(bad.validate());
  bad.beta = 0.1;
  bad.gamma = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("solution1 keeps a stationary point fixed") {
  ImbalancedQuadratic::Params p;
  p.target_rate = ParamVector{0.3, -0.2};
  p.target_distortion = ParamVector{0.3, -0.2};
  const ImbalancedQuadratic q(p);
  TrajectoryState s;
  s.gamma = 0.0;
  const auto r = solution1_step(q, ParamVector{0.3, -0.2}, s, EvalContext{}, 0.1);
  CHECK(r.theta == ParamVector{0.3, -0.2});
  CHECK(r.state.xi == s.xi);
}

TEST_CASE("solution1 keeps uniform weights on the symmetric problem") {
  const auto q = balrd::test::symmetric_quadratic();
  ParamVector theta = q.initial_point(0);
  TrajectoryState s;
  for (int t = 0; t < 50; ++t) {
    const auto r = solution1_step(q, theta, s, EvalContext{}, 0.05);
    CHECK(r.record.weights == SimplexWeights::uniform());
    theta = r.theta;
    s = r.state;
  }
}

TEST_CASE("solution1 is symmetric under relabeling the objectives") {
  const auto q = ImbalancedQuadratic::random(4, 7.0, 5);
  ImbalancedQuadratic::Params swapped = q.params();
  std::swap(swapped.target_rate, swapped.target_distortion);
  std::swap(swapped.scale_rate, swapped.scale_distortion);
  const ImbalancedQuadratic mirror(swapped);

  ParamVector a = q.initial_point(1), b = a;
  TrajectoryState sa, sb;
  sa.xi = {0.4, -0.1};
  sb.xi = {-0.1, 0.4};
  for (int t = 0; t < 20; ++t) {
    const auto ra = solution1_step(q, a, sa, EvalContext{}, 0.01);
    const auto rb = solution1_step(mirror, b, sb, EvalContext{}, 0.01);
    CHECK(ra.record.weights.rate() == rb.record.weights.distortion());
    CHECK(ra.state.xi[0] == rb.state.xi[1]);
    CHECK(ra.state.xi[1] == rb.state.xi[0]);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(near(ra.theta[i], rb.theta[i], 1e-13));
    a = ra.theta;
    b = rb.theta;
    sa = ra.state;
    sb = rb.state;
  }
}

TEST_CASE("solution1 counts two forward passes per step") {
  const auto q = ImbalancedQuadratic::random(3, 10.0, 1);
  PlainDescent rule(0.01);
  OverheadCounters c;
  solution1_step(q, q.initial_point(0), {}, EvalContext{}, rule, {}, &c);
  CHECK(c.loss_evals == 2);
  CHECK(c.grad_evals == 1);
  CHECK(c.balance_calls == 1);
  CHECK(c.logit_updates == 1);
  CHECK(c.gram_builds == 0);
}
