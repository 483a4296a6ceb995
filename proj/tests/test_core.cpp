#include <cmath>
#include <limits>
#include <random>

#include "balrd/core.hpp"
#include "balrd/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace balrd;
using balrd::test::near;

TEST_CASE("log_gradients divides each gradient by its loss") {
  const GradPair g{{1.0, 0.0}, {0.0, 2.0}};
  const GradPair out = log_gradients({2.0, 4.0}, g);
  CHECK(out.rate == std::vector<double>{0.5, 0.0});
  CHECK(out.distortion == std::vector<double>{0.0, 0.5});

  const GradPair same = log_gradients({1.0, 1.0}, GradPair{{3.0, -1.0}, {0.25, 7.0}});
  CHECK(same.rate == std::vector<double>{3.0, -1.0});
  CHECK(same.distortion == std::vector<double>{0.25, 7.0});
}

TEST_CASE("log_gradients agrees with finite differences of log L on a 1-parameter quadratic") {
  ImbalancedQuadratic::Params p;
  p.scale_rate = 1.0;
  p.scale_distortion = 1.0;
  p.target_rate = ParamVector{-1.5};
  p.target_distortion = ParamVector{0.5};
  p.floor = 0.25;
  const ImbalancedQuadratic q(p);
  const ParamVector theta{0.0};
  const EvalContext ctx{};
  const Evaluation ev = q.evaluate(theta, ctx);
  const GradPair lg = log_gradients(ev.losses, ev.grads);
  const double h = 1e-5;
  const LossPair up = q.losses(ParamVector{h}, ctx);
  const LossPair dn = q.losses(ParamVector{-h}, ctx);
  CHECK(near(lg.rate[0], (std::log(up.rate) - std::log(dn.rate)) / (2 * h), 1e-8));
  CHECK(near(lg.distortion[0], (std::log(up.distortion) - std::log(dn.distortion)) / (2 * h),
             1e-8));

  const GradPair direct = log_gradients({0.5, 0.25}, GradPair{{3.0}, {1.0}});
  CHECK(direct.rate[0] == 6.0);
  CHECK(direct.distortion[0] == 4.0);
}

TEST_CASE("log_gradients rejects broken inputs") {
  const GradPair g{{1.0}, {1.0}};
  CHECK_THROWS_AS(log_gradients({0.0, 1.0}, g), NumericError);
  CHECK_THROWS_AS(log_gradients({1.0, -2.0}, g), NumericError);
  CHECK_THROWS_AS(log_gradients({std::numeric_limits<double>::infinity(), 1.0}, g),
                  NumericError);
  CHECK_THROWS_AS(log_gradients({1.0, 1.0}, GradPair{{std::nan("")}, {1.0}}), NumericError);
  CHECK_THROWS_AS(log_gradients({1.0, 1.0}, GradPair{{1.0, 2.0}, {1.0}}), ShapeError);
}

TEST_CASE("log_gradients is equivariant to a common loss scale") {
  const GradPair g{{0.3, -1.2}, {2.0, 0.7}};
  const GradPair scaled{{0.3 * 7, -1.2 * 7}, {2.0 * 7, 0.7 * 7}};
  const GradPair a = log_gradients({1.5, 0.4}, g);
  const GradPair b = log_gradients({1.5 * 7, 0.4 * 7}, scaled);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(near(a.rate[i], b.rate[i], 1e-15));
    CHECK(near(a.distortion[i], b.distortion[i], 1e-15));
  }
}

TEST_CASE("renorm_constant") {
  CHECK(renorm_constant(SimplexWeights::uniform(), {1.0, 1.0}) == 1.0);
  CHECK(renorm_constant({1.0, 0.0}, {2.0, 123.0}) == 2.0);
  CHECK(near(renorm_constant(SimplexWeights::uniform(), {2.0, 4.0}), 8.0 / 3.0, 1e-15));
}

TEST_CASE("SimplexWeights validates membership") {
  CHECK_NOTHROW(SimplexWeights(0.3, 0.7));
  CHECK_THROWS_AS(SimplexWeights(-0.1, 1.1), NumericError);
  CHECK_THROWS_AS(SimplexWeights(0.5, 0.6), NumericError);
  CHECK_THROWS_AS(SimplexWeights(std::nan(""), 0.5), NumericError);
}

TEST_CASE("balanced_direction examples") {
  const GradPair unit{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(balanced_direction(SimplexWeights::uniform(), {1.0, 1.0}, unit) ==
        std::vector<double>{0.5, 0.5});

  const GradPair g{{0.7, -2.5, 3.0}, {1.0, 4.0, -0.5}};
  CHECK(balanced_direction({1.0, 0.0}, {3.3, 0.01}, g) == g.rate);
  CHECK(balanced_direction({0.0, 1.0}, {3.3, 0.01}, g) == g.distortion);

  const auto d = balanced_direction(SimplexWeights::uniform(), {2.0, 4.0}, unit);
  CHECK(near(d[0], 2.0 / 3.0, 1e-15));
  CHECK(near(d[1], 1.0 / 3.0, 1e-15));
}

TEST_CASE("balanced_direction is a convex combination of raw gradients") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(1e-3, 50.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 1 + trial % 7;
    GradPair g{std::vector<double>(m), std::vector<double>(m)};
    for (std::size_t i = 0; i < m; ++i) {
      g.rate[i] = u(rng);
      g.distortion[i] = u(rng);
    }
    const double wr = unit(rng);
    const SimplexWeights w(wr, 1.0 - wr);
    const LossPair l{pos(rng), pos(rng)};

    const auto d = balanced_direction(w, l, g);
    const auto [ar, ad] = raw_gradient_coefficients(w, l);
    CHECK(ar >= 0.0);
    CHECK(ad >= 0.0);
    CHECK(near(ar + ad, 1.0, 1e-15));

    // Literal form: c * (w_R grad/L_R + w_D grad/L_D)
    const double c = renorm_constant(w, l);
    const GradPair lg = log_gradients(l, g);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double literal = c * (w.rate() * lg.rate[i] + w.distortion() * lg.distortion[i]);
      diff += (d[i] - literal) * (d[i] - literal);
      ref += literal * literal;
    }
    CHECK(std::sqrt(diff) <= 1e-10 * std::max(std::sqrt(ref), 1e-300));
    CHECK(norm(d) <= std::max(norm(g.rate), norm(g.distortion)) * (1 + 1e-12));
  }
}

TEST_CASE("balanced_direction without renormalization uses c = 1") {
  const GradPair unit{{1.0, 0.0}, {0.0, 1.0}};
  const auto d = balanced_direction(SimplexWeights::uniform(), {2.0, 4.0}, unit, false);
  CHECK(near(d[0], 0.25, 1e-15));
  CHECK(near(d[1], 0.125, 1e-15));
}

TEST_CASE("improvement_speed") {
  const SpeedPair zero = improvement_speed({1.0, 1.0}, {1.0, 1.0});
  CHECK(zero.rate == 0.0);
  CHECK(zero.distortion == 0.0);
  const SpeedPair s = improvement_speed({2.0, 4.0}, {1.0, 3.0});
  CHECK(s.rate == 0.5);
  CHECK(s.distortion == 0.25);
  const SpeedPair worse = improvement_speed({1.0, 1.0}, {1.1, 0.5});
  CHECK(near(worse.rate, -0.1, 1e-15));
  CHECK(worse.distortion == 0.5);
  CHECK_THROWS_AS(improvement_speed({0.0, 1.0}, {1.0, 1.0}), NumericError);
}

TEST_CASE("first-order speed prediction under small plain-descent steps") {
  const auto q = ImbalancedQuadratic::random(5, 10.0, 3);
  const EvalContext ctx{};
  ParamVector theta = q.initial_point(0);
  const double alpha = 1e-4;
  const SimplexWeights w(0.3, 0.7);
  for (int t = 0; t < 5; ++t) {
    const Evaluation ev = q.evaluate(theta, ctx);
    const auto d = balanced_direction(w, ev.losses, ev.grads);
    const GradPair lg = log_gradients(ev.losses, ev.grads);
    const ParamVector next = theta.stepped(d, alpha);
    const SpeedPair s = improvement_speed(ev.losses, q.losses(next, ctx));
    CHECK(near(s.rate / alpha, dot(lg.rate, d), 0.05));
    CHECK(near(s.distortion / alpha, dot(lg.distortion, d), 0.05));
    theta = next;
  }
}

TEST_CASE("ParamVector helpers") {
  const ParamVector p{1.0, 2.0};
  const std::vector<double> d{0.5, -1.0};
  CHECK(p.stepped(d, 2.0) == ParamVector{0.0, 4.0});
  CHECK(p.all_finite());
  CHECK_FALSE(ParamVector{1.0, std::nan("")}.all_finite());
}
