#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "balrd/problems.hpp"

namespace balrd {

// Gaussian helpers for the discretized entropy model.

/// log Q(x) = log P(Z > x) for standard normal Z, accurate far into the tail.
double log_upper_tail(double x);

/// log(Phi(hi) - Phi(lo)) for lo < hi without cancellation.
double log_bin_probability(double lo, double hi);

/// Bits needed for a unit-width bin centred on `latent` under N(0, sigma^2).
double gaussian_bin_bits(double latent, double sigma);

struct BinBitsGrad {
  double bits = 0.0;
  double d_latent = 0.0;
  double d_log_sigma = 0.0;
};
BinBitsGrad gaussian_bin_bits_grad(double latent, double sigma);

/// Linear transform codec on square patches.
///
///   y = W_e x + b_e,  y~ = y + u,  u ~ U(-0.5, 0.5)
///   x^ = W_d y~ + b_d
///   L_R = mean over pixels of -log2 P(y~) + floor
///   L_D = lambda * 255^2 * MSE(x, x^)
///
/// P is a zero-mean factorized Gaussian with per-channel scale exp(s_k),
/// integrated over the unit quantization bin. The noise is drawn from a
/// stream keyed by (noise_seed, ctx.noise_counter), so evaluations sharing a
/// context see identical noise.
///
/// Parameter layout: W_e (K x P, row-major), b_e (K), W_d (P x K,
/// row-major), b_d (P), s (K). The bias blocks are absent when
/// use_bias is false.
class ToyCodecProblem final : public Problem {
 public:
  struct Config {
    std::size_t patch_size = 8;
    std::size_t latent_dim = 3;
    double lambda_rd = 0.0018;
    std::uint64_t noise_seed = 0;
    std::uint64_t data_seed = 0;
    std::size_t batch_size = 32;
    std::size_t eval_patches = 256;
    bool use_bias = true;
    double init_scale = 1.0;
    double rate_floor = 1e-6;
    PatchSynthesizer source;
  };

  explicit ToyCodecProblem(Config config);

  std::string name() const override;
  std::size_t dim() const override;
  LossPair losses(const ParamVector& theta, const EvalContext& ctx) const override;
  Evaluation evaluate(const ParamVector& theta, const EvalContext& ctx) const override;
  ParamVector initial_point(std::uint64_t seed) const override;
  std::vector<DataBatch> training_batches(std::size_t count, std::uint64_t seed) const override;
  DataBatch evaluation_batch(std::uint64_t seed) const override;

  const Config& config() const { return config_; }
  std::size_t pixels() const { return config_.patch_size * config_.patch_size; }

  /// Noise added to latent `channel` of patch `sample` under `ctx`.
  std::vector<double> noise(const EvalContext& ctx, std::size_t samples) const;

  /// Mean squared error in [0,1] pixel units recovered from a distortion loss.
  double mse_from_distortion(double distortion) const;

  /// Offsets of the parameter blocks inside theta.
  struct Layout {
    std::size_t enc_w, enc_b, dec_w, dec_b, log_scale, total;
  };
  Layout layout() const;

 private:
  Evaluation compute(const ParamVector& theta, const EvalContext& ctx, bool want_grad) const;

  Config config_;
};

}  // namespace balrd
