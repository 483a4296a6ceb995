#include "balrd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace balrd {

std::vector<DataBatch> Problem::training_batches(std::size_t count, std::uint64_t) const {
  return std::vector<DataBatch>(count);
}

DataBatch Problem::evaluation_batch(std::uint64_t) const { return {}; }

void Problem::check_theta(const ParamVector& theta) const {
  if (theta.size() != dim()) {
    throw ShapeError(name() + ": expected " + std::to_string(dim()) + " parameters, got " +
                     std::to_string(theta.size()));
  }
  if (!theta.all_finite()) throw NumericError(name() + ": nonfinite parameter");
}

ImbalancedQuadratic::ImbalancedQuadratic(Params params) : params_(std::move(params)) {
  if (!(params_.scale_rate > 0.0) || !(params_.scale_distortion > 0.0)) {
    throw ShapeError("imbalanced_quadratic: scales must be positive");
  }
  if (!(params_.floor > 0.0)) throw ShapeError("imbalanced_quadratic: floor must be positive");
  if (params_.target_rate.size() == 0 ||
      params_.target_rate.size() != params_.target_distortion.size()) {
    throw ShapeError("imbalanced_quadratic: targets must be nonempty and of equal length");
  }
  if (params_.init && params_.init->size() != params_.target_rate.size()) {
    throw ShapeError("imbalanced_quadratic: init has the wrong length");
  }
}

ImbalancedQuadratic ImbalancedQuadratic::random(std::size_t dim, double scale_ratio,
                                                std::uint64_t seed, double floor) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Params p;
  p.scale_rate = scale_ratio;
  p.scale_distortion = 1.0;
  p.floor = floor;
  p.target_rate = ParamVector(dim);
  p.target_distortion = ParamVector(dim);
  ParamVector init(dim);
  for (std::size_t i = 0; i < dim; ++i) p.target_rate[i] = normal(rng);
  for (std::size_t i = 0; i < dim; ++i) p.target_distortion[i] = normal(rng);
  for (std::size_t i = 0; i < dim; ++i) init[i] = 2.0 * normal(rng);
  p.init = std::move(init);
  return ImbalancedQuadratic(std::move(p));
}

LossPair ImbalancedQuadratic::losses(const ParamVector& theta, const EvalContext&) const {
  check_theta(theta);
  double sr = 0.0, sd = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double er = theta[i] - params_.target_rate[i];
    const double ed = theta[i] - params_.target_distortion[i];
    sr += er * er;
    sd += ed * ed;
  }
  return {params_.scale_rate * sr + params_.floor, params_.scale_distortion * sd + params_.floor};
}

Evaluation ImbalancedQuadratic::evaluate(const ParamVector& theta, const EvalContext& ctx) const {
  Evaluation ev;
  ev.losses = losses(theta, ctx);
  ev.grads.rate.resize(theta.size());
  ev.grads.distortion.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    ev.grads.rate[i] = 2.0 * params_.scale_rate * (theta[i] - params_.target_rate[i]);
    ev.grads.distortion[i] =
        2.0 * params_.scale_distortion * (theta[i] - params_.target_distortion[i]);
  }
  return ev;
}

ParamVector ImbalancedQuadratic::initial_point(std::uint64_t seed) const {
  if (params_.init) return *params_.init;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector theta(dim());
  for (double& v : theta) v = normal(rng);
  return theta;
}

DataBatch make_patch_batch(const PatchSynthesizer& source, std::size_t count,
                           std::size_t patch_size, std::uint64_t seed) {
  DataBatch batch;
  batch.patch_size = patch_size;
  batch.count = count;
  batch.pixels.resize(count * patch_size * patch_size);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  struct Wave {
    double amp, fx, fy, phase;
  };
  std::vector<Wave> waves(static_cast<std::size_t>(std::max(source.waves, 0)));
  const double two_pi = 2.0 * std::numbers::pi;
  const double edge = static_cast<double>(patch_size);

  for (std::size_t n = 0; n < count; ++n) {
    const double offset = between(source.min_offset, source.max_offset);
    for (auto& w : waves) {
      w.amp = between(source.min_amplitude, source.max_amplitude);
      w.fx = between(-source.max_frequency, source.max_frequency);
      w.fy = between(-source.max_frequency, source.max_frequency);
      w.phase = between(0.0, two_pi);
    }
    double* out = batch.pixels.data() + n * patch_size * patch_size;
    for (std::size_t r = 0; r < patch_size; ++r) {
      for (std::size_t c = 0; c < patch_size; ++c) {
        double v = offset;
        for (const auto& w : waves) {
          v += w.amp * std::sin(two_pi * (w.fx * static_cast<double>(c) +
                                          w.fy * static_cast<double>(r)) / edge +
                                w.phase);
        }
        out[r * patch_size + c] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return batch;
}

GradPair fd_oracle(const Problem& problem, const ParamVector& theta, const EvalContext& ctx,
                   double step) {
  if (!(step > 0.0)) throw ShapeError("fd_oracle: step must be positive");
  GradPair out;
  out.rate.resize(theta.size());
  out.distortion.resize(theta.size());
  ParamVector probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + step;
    const LossPair plus = problem.losses(probe, ctx);
    probe[i] = theta[i] - step;
    const LossPair minus = problem.losses(probe, ctx);
    probe[i] = theta[i];
    out.rate[i] = (plus.rate - minus.rate) / (2.0 * step);
    out.distortion[i] = (plus.distortion - minus.distortion) / (2.0 * step);
  }
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double scale = std::max(norm(a), norm(b));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff) / scale;
}

std::string fingerprint_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string problem_fingerprint(const Problem& problem) {
  return fingerprint_hex(problem.name() + "/" + std::to_string(problem.dim()));
}

}  // namespace balrd
