#include "svguard/emg_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "svguard/simd/kernels.hpp"

namespace svguard {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::domain_error(std::string(what) + " is not finite");
}

}  // namespace

StreamTiming::StreamTiming(int fs) : fs_(fs) {
  if (fs <= 0) throw std::invalid_argument("fs must be positive");
}

std::int64_t StreamTiming::slot_offset_ns(int c) const {
  const std::int64_t num = static_cast<std::int64_t>(c) * kNanosPerSecond;
  return (num + fs_ / 2) / fs_;
}

double expected_arrival(std::int64_t second, int c, const StreamTiming& timing) {
  if (!timing.valid_counter(c))
    throw std::out_of_range("smpCnt " + std::to_string(c) + " outside [0, " + std::to_string(timing.fs()) + ")");
  return static_cast<double>(second) + static_cast<double>(c) / timing.fs();
}

ArrivalShift arrival_shift(std::int64_t arrival_ns, int smp_cnt, const StreamTiming& timing,
                           double current_mean_shift_s) {
  if (!timing.valid_counter(smp_cnt))
    throw std::out_of_range("smpCnt " + std::to_string(smp_cnt) + " outside [0, " +
                            std::to_string(timing.fs()) + ")");
  const std::int64_t offset = timing.slot_offset_ns(smp_cnt);
  const auto mean_ns = static_cast<std::int64_t>(std::llround(current_mean_shift_s * 1e9));
  const std::int64_t centre = floor_div(arrival_ns - offset - mean_ns + kNanosPerSecond / 2, kNanosPerSecond);

  ArrivalShift best;
  std::int64_t best_dev = std::numeric_limits<std::int64_t>::max();
  for (std::int64_t i = centre - 1; i <= centre + 1; ++i) {
    const std::int64_t shift = arrival_ns - timing.expected_ns(i, smp_cnt);
    const std::int64_t dev = shift > mean_ns ? shift - mean_ns : mean_ns - shift;
    if (dev < best_dev) {
      best_dev = dev;
      best.shift_ns = shift;
      best.second_index = i;
    }
  }
  best.shift_s = static_cast<double>(best.shift_ns) * 1e-9;
  return best;
}

double EmgParams::full_std() const { return std::sqrt(variance()); }

double EmgParams::skewness() const {
  const double v = variance();
  return 2.0 * tau * tau * tau / (v * std::sqrt(v));
}

EmgMoments theoretical_moments(double mu, double sigma, double tau) {
  return {mu + tau, sigma * sigma + tau * tau, 2.0 * tau * tau * tau};
}

double erfcx(double x) {
  if (x < 10.0) {
    // exp(x^2) with x^2 split into hi + lo so the rounding of the square is
    // not amplified by the exponential.
    const double hi = x * x;
    const double lo = std::fma(x, x, -hi);
    return std::exp(hi) * (1.0 + lo) * std::erfc(x);
  }
  // Laplace continued fraction, evaluated backwards.
  double f = x;
  for (int n = 60; n >= 1; --n) f = x + (0.5 * n) / f;
  return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

double emg_pdf(double x, double mu, double sigma, double tau) {
  require_finite(x, "x");
  require_finite(mu, "mu");
  require_finite(sigma, "sigma");
  require_finite(tau, "tau");
  if (sigma < 0.0) throw std::domain_error("sigma must be non-negative");
  if (!(tau > 0.0)) throw std::domain_error("tau must be positive");

  const double lambda = 1.0 / tau;
  if (sigma == 0.0) return x < mu ? 0.0 : lambda * std::exp(-lambda * (x - mu));

  const double u = (x - mu) / sigma;
  const double a = sigma / tau;
  const double z = (a - u) / std::numbers::sqrt2;
  if (z >= 0.0) return 0.5 * lambda * std::exp(-0.5 * u * u) * erfcx(z);
  // Here u > a, so the exponent a^2/2 - a*u is negative.
  return 0.5 * lambda * std::exp(0.5 * a * a - a * u) * std::erfc(z);
}

EmgParams estimate_mme(double m1, double m2, double m3) {
  if (!std::isfinite(m1) || !std::isfinite(m2) || !std::isfinite(m3))
    throw std::invalid_argument("moments must be finite");
  if (!(m2 > 0.0)) throw std::invalid_argument("second central moment must be positive");

  const double s = std::sqrt(m2);
  const double raw_skew = m3 / (m2 * s);
  const double skew = std::clamp(raw_skew, kSkewMin, kSkewMax);
  const double c = std::cbrt(0.5 * skew);

  EmgParams p;
  p.m1 = m1;
  p.m2 = m2;
  p.m3 = m3;
  p.clamped = skew != raw_skew;
  p.tau = s * c;
  p.mu = m1 - p.tau;
  p.sigma = s * std::sqrt(1.0 - c * c);
  return p;
}

EmgMoments batch_moments(std::span<const double> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const double n = static_cast<double>(batch.size());
  const double mean = simd::sum(batch.data(), batch.size()) / n;
  const auto sums = simd::central_sums(batch.data(), batch.size(), mean);
  return {mean, sums.s2 / n, sums.s3 / n};
}

EmgParams update_moments(const EmgParams& prev, std::span<const double> batch, int fs) {
  if (fs <= 0) throw std::invalid_argument("fs must be positive");
  const auto b = batch_moments(batch);
  const double k = static_cast<double>(batch.size());
  const double w = static_cast<double>(fs);
  const double m1 = (w * prev.m1 + k * b.m1) / (w + k);
  const double m2 = (w * prev.m2 + k * b.m2) / (w + k);
  const double m3 = (w * prev.m3 + k * b.m3) / (w + k);
  EmgParams next = estimate_mme(m1, std::max(m2, kVarianceFloor), m3);
  if (m2 < kVarianceFloor) next.clamped = true;
  return next;
}

}  // namespace svguard
