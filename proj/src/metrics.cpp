#include "balrd/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace balrd {

namespace {

constexpr double kQualityResolution = 1e-4;
constexpr double kMinOverlap = 0.1;

double horner(const std::array<double, 4>& c, double u) {
  return ((c[3] * u + c[2]) * u + c[1]) * u + c[0];
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  double s = 0.0;
  for (double x : v) s += x;
  out.mean = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

double psnr(double mse, double peak) {
  if (!(peak > 0.0)) throw NumericError("psnr: peak must be positive");
  if (mse < 0.0 || std::isnan(mse)) throw NumericError("psnr: mse must be nonnegative");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

RDCurve::RDCurve(std::vector<RDPoint> points, std::string label)
    : points_(std::move(points)), label_(std::move(label)) {
  if (points_.size() < kMinPoints) {
    throw CurveError("curve '" + label_ + "' needs at least 4 points, has " +
                     std::to_string(points_.size()));
  }
  for (const auto& p : points_) {
    if (!(p.rate > 0.0) || !std::isfinite(p.rate) || !std::isfinite(p.quality)) {
      throw CurveError("curve '" + label_ + "' has a nonpositive or nonfinite point");
    }
  }
  std::sort(points_.begin(), points_.end(),
            [](const RDPoint& a, const RDPoint& b) { return a.rate < b.rate; });
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].rate > points_[i - 1].rate)) {
      throw CurveError("curve '" + label_ + "' has duplicate rates");
    }
    if (!(points_[i].quality > points_[i - 1].quality)) {
      throw CurveError("curve '" + label_ + "' quality is not monotonic in rate");
    }
  }
}

RDCurve RDCurve::scaled_rates(double factor) const {
  std::vector<RDPoint> pts = points_;
  for (auto& p : pts) p.rate *= factor;
  return RDCurve(std::move(pts), label_);
}

double CubicFit::operator()(double quality) const {
  return horner(coeffs, (quality - center) / scale);
}

CubicFit fit_log_rate(const RDCurve& curve) {
  const auto& pts = curve.points();
  const auto n = static_cast<Eigen::Index>(pts.size());
  CubicFit fit;
  fit.center = 0.5 * (curve.min_quality() + curve.max_quality());
  fit.scale = std::max(0.5 * (curve.max_quality() - curve.min_quality()), 1e-12);

  Eigen::MatrixXd vander(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (pts[static_cast<std::size_t>(i)].quality - fit.center) / fit.scale;
    vander(i, 0) = 1.0;
    vander(i, 1) = u;
    vander(i, 2) = u * u;
    vander(i, 3) = u * u * u;
    y(i) = std::log(pts[static_cast<std::size_t>(i)].rate);
  }
  const Eigen::VectorXd c = vander.colPivHouseholderQr().solve(y);
  for (int i = 0; i < 4; ++i) fit.coeffs[static_cast<std::size_t>(i)] = c(i);
  fit.rms_residual = std::sqrt((vander * c - y).squaredNorm() / static_cast<double>(n));
  return fit;
}

BdRateReport bd_rate_report(const RDCurve& anchor, const RDCurve& test) {
  BdRateReport r;
  r.overlap_low = std::max(anchor.min_quality(), test.min_quality());
  r.overlap_high = std::min(anchor.max_quality(), test.max_quality());
  if (!(r.overlap_high - r.overlap_low >= kMinOverlap)) {
    throw CurveError("no quality overlap between '" + anchor.label() + "' and '" + test.label() +
                     "'");
  }
  r.anchor_fit = fit_log_rate(anchor);
  r.test_fit = fit_log_rate(test);

  const double span = r.overlap_high - r.overlap_low;
  r.intervals = static_cast<std::size_t>(std::ceil(span / kQualityResolution));
  const double h = span / static_cast<double>(r.intervals);
  auto diff = [&](double q) { return r.test_fit(q) - r.anchor_fit(q); };
  double integral = 0.5 * (diff(r.overlap_low) + diff(r.overlap_high));
  for (std::size_t i = 1; i < r.intervals; ++i) {
    integral += diff(r.overlap_low + h * static_cast<double>(i));
  }
  integral *= h;
  r.mean_log_rate_diff = integral / span;
  r.percent = std::expm1(r.mean_log_rate_diff) * 100.0;
  return r;
}

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
  return bd_rate_report(anchor, test).percent;
}

std::vector<SpeedPair> speed_trace(std::span<const TraceRecord> trace) {
  std::vector<SpeedPair> out;
  if (trace.size() < 2) return out;
  out.reserve(trace.size() - 1);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    out.push_back(improvement_speed(trace[i - 1].losses, trace[i].losses));
  }
  return out;
}

BalanceGap balance_gap(std::span<const SpeedPair> series, double skip_fraction) {
  if (series.empty()) throw ShapeError("balance_gap: empty series");
  if (!(skip_fraction >= 0.0 && skip_fraction < 1.0)) {
    throw ShapeError("balance_gap: skip_fraction must lie in [0, 1)");
  }
  const auto skip = static_cast<std::size_t>(std::floor(skip_fraction *
                                                        static_cast<double>(series.size())));
  std::vector<double> gap, rate, dist;
  for (std::size_t i = skip; i < series.size(); ++i) {
    gap.push_back(std::abs(series[i].rate - series[i].distortion));
    rate.push_back(series[i].rate);
    dist.push_back(series[i].distortion);
  }
  return {mean_std(gap), mean_std(rate), mean_std(dist), gap.size()};
}

std::vector<SpeedPair> ema_smooth(std::span<const SpeedPair> series, double factor) {
  if (!(factor >= 0.0 && factor < 1.0)) throw ShapeError("ema factor must lie in [0, 1)");
  std::vector<SpeedPair> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    if (out.empty()) {
      out.push_back(s);
      continue;
    }
    const SpeedPair& prev = out.back();
    out.push_back({factor * prev.rate + (1.0 - factor) * s.rate,
                   factor * prev.distortion + (1.0 - factor) * s.distortion});
  }
  return out;
}

RDCurve read_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read curve " + path.string());
  const std::string label = path.stem().string();
  std::vector<RDPoint> points;

  if (path.extension() == ".json") {
    try {
      const nlohmann::json j = nlohmann::json::parse(in);
      for (const auto& p : j.at("points")) {
        points.push_back({p.at("rate").get<double>(), p.at("quality").get<double>()});
      }
      return RDCurve(std::move(points), j.value("label", label));
    } catch (const nlohmann::json::exception& e) {
      throw CurveError("malformed curve " + path.string() + ": " + e.what());
    }
  }

  std::string line;
  if (!std::getline(in, line) || trim(line) != "rate,quality") {
    throw CurveError("curve " + path.string() + ": expected header 'rate,quality'");
  }
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw CurveError("curve " + path.string() + ": bad row");
    try {
      std::size_t used = 0;
      const std::string rate_text = trim(line.substr(0, comma));
      const std::string quality_text = trim(line.substr(comma + 1));
      const double rate = std::stod(rate_text, &used);
      if (used != rate_text.size()) throw std::invalid_argument(rate_text);
      const double quality = std::stod(quality_text, &used);
      if (used != quality_text.size()) throw std::invalid_argument(quality_text);
      points.push_back({rate, quality});
    } catch (const std::logic_error&) {
      throw CurveError("curve " + path.string() + ": unparsable row '" + line + "'");
    }
  }
  return RDCurve(std::move(points), label);
}

void write_curve_csv(const RDCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve " + path.string());
  out.precision(17);
  out << "rate,quality\n";
  for (const auto& p : curve.points()) out << p.rate << ',' << p.quality << '\n';
  if (!out) throw IoError("failed writing curve " + path.string());
}

}  // namespace balrd
