#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "balrd/core.hpp"

namespace balrd {

/// 10 log10(peak^2 / mse); +infinity for mse == 0.
double psnr(double mse, double peak);

struct RDPoint {
  double rate = 0.0;     // bits per element
  double quality = 0.0;  // PSNR, dB
};

/// At least four points, strictly increasing in both rate and quality.
class RDCurve {
 public:
  static constexpr std::size_t kMinPoints = 4;

  /// Sorts by rate and validates. Throws CurveError.
  RDCurve(std::vector<RDPoint> points, std::string label = {});

  const std::vector<RDPoint>& points() const { return points_; }
  const std::string& label() const { return label_; }
  double min_quality() const { return points_.front().quality; }
  double max_quality() const { return points_.back().quality; }

  /// Same curve with every rate multiplied by `factor`.
  RDCurve scaled_rates(double factor) const;

 private:
  std::vector<RDPoint> points_;
  std::string label_;
};

/// Cubic least-squares fit ln(rate) = sum c_i u^i with u = (quality - center) / scale.
struct CubicFit {
  std::array<double, 4> coeffs{};
  double center = 0.0;
  double scale = 1.0;
  double rms_residual = 0.0;

  double operator()(double quality) const;
};

CubicFit fit_log_rate(const RDCurve& curve);

struct BdRateReport {
  double percent = 0.0;
  double overlap_low = 0.0;
  double overlap_high = 0.0;
  double mean_log_rate_diff = 0.0;
  std::size_t intervals = 0;
  CubicFit anchor_fit;
  CubicFit test_fit;
};

/// Bjontegaard delta rate of `test` against `anchor`, in percent. Negative
/// means the test curve needs fewer bits at equal quality. Integration uses
/// the trapezoidal rule at 1e-4 dB over the common quality interval; less
/// than 0.1 dB of overlap throws CurveError("no quality overlap").
BdRateReport bd_rate_report(const RDCurve& anchor, const RDCurve& test);
double bd_rate(const RDCurve& anchor, const RDCurve& test);

/// Consecutive-record improvement speeds; n records give n-1 entries.
std::vector<SpeedPair> speed_trace(std::span<const TraceRecord> trace);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct BalanceGap {
  MeanStd gap;  // |s_R - s_D|
  MeanStd rate;
  MeanStd distortion;
  std::size_t samples = 0;
};

/// Statistics over the series after dropping the first `skip_fraction` of
/// it. Population standard deviation.
BalanceGap balance_gap(std::span<const SpeedPair> series, double skip_fraction = 0.0);

/// Exponential moving average, s_t = f * s_{t-1} + (1 - f) * x_t, seeded with
/// the first value. Export-time smoothing only.
std::vector<SpeedPair> ema_smooth(std::span<const SpeedPair> series, double factor = 0.9);

// Curve files: CSV with header "rate,quality", or JSON
// {"label": ..., "points": [{"rate": r, "quality": q}, ...]}.
RDCurve read_curve(const std::filesystem::path& path);
void write_curve_csv(const RDCurve& curve, const std::filesystem::path& path);

}  // namespace balrd
