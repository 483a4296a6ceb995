#include "balrd/toy_codec.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace balrd {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kPixelPeak = 255.0;
// Above this the erfc-based log tail loses digits; switch to the continued
// fraction.
constexpr double kTailSwitch = 5.0;

// erfc(z) * exp(z^2) for z >= ~3 by backward evaluation of the Laplace
// continued fraction erfc(z) = exp(-z^2)/sqrt(pi) / (z + 1/2 / (z + 1 / (z + 3/2 / ...)))
double erfc_scaled_cf(double z) {
  constexpr int kTerms = 80;
  double t = z;
  for (int k = kTerms; k >= 1; --k) t = z + (0.5 * k) / t;
  return 1.0 / (std::sqrt(std::numbers::pi) * t);
}

double log_phi(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

double log_upper_tail(double x) {
  if (x < kTailSwitch) return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
  const double z = x / std::numbers::sqrt2;
  return std::log(0.5 * erfc_scaled_cf(z)) - z * z;
}

double log_bin_probability(double lo, double hi) {
  if (!(lo < hi)) throw NumericError("log_bin_probability: empty bin");
  if (lo >= 0.0) {
    const double a = log_upper_tail(lo);
    const double b = log_upper_tail(hi);
    return a + std::log1p(-std::exp(b - a));
  }
  if (hi <= 0.0) {
    const double a = log_upper_tail(-hi);
    const double b = log_upper_tail(-lo);
    return a + std::log1p(-std::exp(b - a));
  }
  // Bin straddles zero: both tails are at most one half.
  const double tails =
      0.5 * std::erfc(hi / std::numbers::sqrt2) + 0.5 * std::erfc(-lo / std::numbers::sqrt2);
  return std::log1p(-tails);
}

double gaussian_bin_bits(double latent, double sigma) {
  return -log_bin_probability((latent - 0.5) / sigma, (latent + 0.5) / sigma) / kLn2;
}

BinBitsGrad gaussian_bin_bits_grad(double latent, double sigma) {
  const double lo = (latent - 0.5) / sigma;
  const double hi = (latent + 0.5) / sigma;
  const double log_p = log_bin_probability(lo, hi);
  const double phi_hi_over_p = std::exp(log_phi(hi) - log_p);
  const double phi_lo_over_p = std::exp(log_phi(lo) - log_p);
  BinBitsGrad g;
  g.bits = -log_p / kLn2;
  g.d_latent = -(phi_hi_over_p - phi_lo_over_p) / (sigma * kLn2);
  g.d_log_sigma = (phi_hi_over_p * hi - phi_lo_over_p * lo) / kLn2;
  return g;
}

ToyCodecProblem::ToyCodecProblem(Config config) : config_(std::move(config)) {
  if (config_.patch_size == 0 || config_.latent_dim == 0) {
    throw ShapeError("toy_codec: patch_size and latent_dim must be positive");
  }
  if (!(config_.lambda_rd > 0.0)) throw ShapeError("toy_codec: lambda_rd must be positive");
  if (config_.batch_size == 0 || config_.eval_patches == 0) {
    throw ShapeError("toy_codec: batch sizes must be positive");
  }
  if (!(config_.rate_floor > 0.0)) throw ShapeError("toy_codec: rate_floor must be positive");
}

std::string ToyCodecProblem::name() const {
  return "toy_codec[p" + std::to_string(config_.patch_size) + ",k" +
         std::to_string(config_.latent_dim) + (config_.use_bias ? ",bias]" : "]");
}

ToyCodecProblem::Layout ToyCodecProblem::layout() const {
  const std::size_t p = pixels();
  const std::size_t k = config_.latent_dim;
  const std::size_t bias_k = config_.use_bias ? k : 0;
  const std::size_t bias_p = config_.use_bias ? p : 0;
  Layout l{};
  l.enc_w = 0;
  l.enc_b = l.enc_w + k * p;
  l.dec_w = l.enc_b + bias_k;
  l.dec_b = l.dec_w + p * k;
  l.log_scale = l.dec_b + bias_p;
  l.total = l.log_scale + k;
  return l;
}

std::size_t ToyCodecProblem::dim() const { return layout().total; }

double ToyCodecProblem::mse_from_distortion(double distortion) const {
  return distortion / (config_.lambda_rd * kPixelPeak * kPixelPeak);
}

std::vector<double> ToyCodecProblem::noise(const EvalContext& ctx, std::size_t samples) const {
  std::mt19937_64 rng(mix_seed(config_.noise_seed, ctx.noise_counter));
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  std::vector<double> u(samples * config_.latent_dim);
  for (double& v : u) v = uniform(rng);
  return u;
}

std::vector<DataBatch> ToyCodecProblem::training_batches(std::size_t count,
                                                         std::uint64_t seed) const {
  std::vector<DataBatch> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(make_patch_batch(config_.source, config_.batch_size, config_.patch_size,
                                   mix_seed(config_.data_seed, seed, i + 1)));
  }
  return out;
}

DataBatch ToyCodecProblem::evaluation_batch(std::uint64_t seed) const {
  // Counter 0 is never used for training batches.
  return make_patch_batch(config_.source, config_.eval_patches, config_.patch_size,
                          mix_seed(config_.data_seed, seed, 0));
}

ParamVector ToyCodecProblem::initial_point(std::uint64_t seed) const {
  const Layout l = layout();
  const std::size_t p = pixels();
  const std::size_t k = config_.latent_dim;
  std::mt19937_64 rng(mix_seed(seed, 0x70c0dec));
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector theta(l.total, 0.0);
  const double enc_scale = config_.init_scale / std::sqrt(static_cast<double>(p));
  const double dec_scale = 0.1 * config_.init_scale / std::sqrt(static_cast<double>(k));
  for (std::size_t i = 0; i < k * p; ++i) theta[l.enc_w + i] = enc_scale * normal(rng);
  for (std::size_t i = 0; i < p * k; ++i) theta[l.dec_w + i] = dec_scale * normal(rng);
  return theta;
}

LossPair ToyCodecProblem::losses(const ParamVector& theta, const EvalContext& ctx) const {
  return compute(theta, ctx, false).losses;
}

Evaluation ToyCodecProblem::evaluate(const ParamVector& theta, const EvalContext& ctx) const {
  return compute(theta, ctx, true);
}

Evaluation ToyCodecProblem::compute(const ParamVector& theta, const EvalContext& ctx,
                                    bool want_grad) const {
  check_theta(theta);
  if (ctx.batch == nullptr || ctx.batch->empty()) throw ShapeError("toy_codec: empty batch");
  const DataBatch& batch = *ctx.batch;
  if (batch.patch_size != config_.patch_size) {
    throw ShapeError("toy_codec: batch patch size does not match the codec");
  }

  const Layout l = layout();
  const std::size_t p = pixels();
  const std::size_t k_dim = config_.latent_dim;
  const std::size_t n_samples = batch.count;
  const bool bias = config_.use_bias;
  const double* enc_w = theta.values().data() + l.enc_w;
  const double* enc_b = theta.values().data() + l.enc_b;
  const double* dec_w = theta.values().data() + l.dec_w;
  const double* dec_b = theta.values().data() + l.dec_b;
  const double* log_scale = theta.values().data() + l.log_scale;

  const double elements = static_cast<double>(n_samples * p);
  const double c_rate = 1.0 / elements;
  const double c_dist = config_.lambda_rd * kPixelPeak * kPixelPeak / elements;

  std::vector<double> sigma(k_dim);
  for (std::size_t k = 0; k < k_dim; ++k) sigma[k] = std::exp(log_scale[k]);

  const std::vector<double> u = noise(ctx, n_samples);

  Evaluation ev;
  if (want_grad) {
    ev.grads.rate.assign(l.total, 0.0);
    ev.grads.distortion.assign(l.total, 0.0);
  }
  double* gr = want_grad ? ev.grads.rate.data() : nullptr;
  double* gd = want_grad ? ev.grads.distortion.data() : nullptr;

  std::vector<double> latent(k_dim), resid(p), g_latent_d(k_dim), g_latent_r(k_dim);
  double bits_sum = 0.0;
  double sse = 0.0;

  for (std::size_t n = 0; n < n_samples; ++n) {
    const auto x = batch.patch(n);
    for (std::size_t k = 0; k < k_dim; ++k) {
      double y = bias ? enc_b[k] : 0.0;
      const double* row = enc_w + k * p;
      for (std::size_t j = 0; j < p; ++j) y += row[j] * x[j];
      latent[k] = y + u[n * k_dim + k];
    }
    for (std::size_t j = 0; j < p; ++j) {
      double xh = bias ? dec_b[j] : 0.0;
      const double* row = dec_w + j * k_dim;
      for (std::size_t k = 0; k < k_dim; ++k) xh += row[k] * latent[k];
      resid[j] = xh - x[j];
      sse += resid[j] * resid[j];
    }
    for (std::size_t k = 0; k < k_dim; ++k) {
      if (!want_grad) {
        bits_sum += gaussian_bin_bits(latent[k], sigma[k]);
        continue;
      }
      const BinBitsGrad b = gaussian_bin_bits_grad(latent[k], sigma[k]);
      bits_sum += b.bits;
      g_latent_r[k] = c_rate * b.d_latent;
      gr[l.log_scale + k] += c_rate * b.d_log_sigma;
    }
    if (!want_grad) continue;

    std::fill(g_latent_d.begin(), g_latent_d.end(), 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      const double g = 2.0 * c_dist * resid[j];
      double* row = gd + l.dec_w + j * k_dim;
      const double* w_row = dec_w + j * k_dim;
      for (std::size_t k = 0; k < k_dim; ++k) {
        row[k] += g * latent[k];
        g_latent_d[k] += w_row[k] * g;
      }
      if (bias) gd[l.dec_b + j] += g;
    }
    for (std::size_t k = 0; k < k_dim; ++k) {
      double* row_d = gd + l.enc_w + k * p;
      double* row_r = gr + l.enc_w + k * p;
      for (std::size_t j = 0; j < p; ++j) {
        row_d[j] += g_latent_d[k] * x[j];
        row_r[j] += g_latent_r[k] * x[j];
      }
      if (bias) {
        gd[l.enc_b + k] += g_latent_d[k];
        gr[l.enc_b + k] += g_latent_r[k];
      }
    }
  }

  ev.losses.rate = c_rate * bits_sum + config_.rate_floor;
  ev.losses.distortion = c_dist * sse;
  return ev;
}

}  // namespace balrd
