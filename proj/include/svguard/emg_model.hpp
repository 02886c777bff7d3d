#pragma once

// Arrival-time mathematics for a Sampled Values stream: theoretical slot
// times, arrival-time shift with second unwrapping, the exponentially
// modified Gaussian (EMG) density, closed-form method-of-moments fitting and
// the weighted moment update used by the prevention engine.
//
// Times on the wire are integer nanoseconds; moments and EMG parameters are
// double-precision seconds.

#include <cstdint>
#include <span>

namespace svguard {

inline constexpr std::int64_t kNanosPerSecond = 1'000'000'000;

// Skewness admissible for the closed-form EMG inversion. Below the floor tau
// collapses; at 2 sigma collapses.
inline constexpr double kSkewMin = 1e-4;
inline constexpr double kSkewMax = 2.0 - 1e-6;
// Smallest second central moment handed to the estimator, (1 us)^2.
inline constexpr double kVarianceFloor = 1e-12;

class StreamTiming {
 public:
  /// Throws std::invalid_argument when fs <= 0.
  explicit StreamTiming(int fs);

  int fs() const { return fs_; }
  double slot_period_s() const { return 1.0 / fs_; }
  /// Offset of slot `c` inside its second, rounded to the nearest ns.
  std::int64_t slot_offset_ns(int c) const;
  /// Theoretical arrival of (second, c) in ns.
  std::int64_t expected_ns(std::int64_t second, int c) const {
    return second * kNanosPerSecond + slot_offset_ns(c);
  }
  bool valid_counter(int c) const { return c >= 0 && c < fs_; }

 private:
  int fs_;
};

/// i + c / fs in seconds. Throws std::out_of_range when c is not in [0, fs).
double expected_arrival(std::int64_t second, int c, const StreamTiming& timing);

struct ArrivalShift {
  double shift_s = 0.0;
  std::int64_t shift_ns = 0;
  std::int64_t second_index = 0;
};

/// Arrival minus theoretical slot time. The second index is chosen among the
/// three candidates nearest the arrival as the one whose shift lies closest to
/// `current_mean_shift_s`, so shifts far from zero do not wrap.
ArrivalShift arrival_shift(std::int64_t arrival_ns, int smp_cnt, const StreamTiming& timing,
                           double current_mean_shift_s);

struct EmgParams {
  double mu = 0.0;
  double sigma = 0.0;
  double tau = 1.0;
  // Running mean, second and third central moments of the shifts.
  double m1 = 1.0;
  double m2 = 1.0;
  double m3 = 2.0;
  // Set when the fit clamped the sample skewness or floored the variance.
  bool clamped = false;

  double lambda() const { return 1.0 / tau; }
  double expected_value() const { return mu + tau; }
  double variance() const { return sigma * sigma + tau * tau; }
  /// Dispersion of the whole distribution, sqrt(sigma^2 + tau^2).
  double full_std() const;
  double skewness() const;
};

/// Moments (mean, variance, third central moment) of EMG(mu, sigma, tau).
struct EmgMoments {
  double m1, m2, m3;
};
EmgMoments theoretical_moments(double mu, double sigma, double tau);

/// exp(x^2) * erfc(x).
double erfcx(double x);

/// EMG density. Uses the scaled complementary error function in the tail so
/// neither factor of the product over- or underflows. sigma == 0 gives the
/// shifted exponential. Throws std::domain_error on non-finite input,
/// sigma < 0 or tau <= 0.
double emg_pdf(double x, double mu, double sigma, double tau);
inline double emg_pdf(double x, const EmgParams& p) { return emg_pdf(x, p.mu, p.sigma, p.tau); }

/// Closed-form method-of-moments fit. m2 and m3 are central moments. The
/// sample skewness is clamped to [kSkewMin, kSkewMax]. Throws
/// std::invalid_argument when m2 <= 0 or any input is non-finite.
EmgParams estimate_mme(double m1, double m2, double m3);

/// Batch mean and population central moments.
EmgMoments batch_moments(std::span<const double> batch);

/// Blends `batch` into the running moments with weights fs and k, then refits.
/// The blended variance is floored at kVarianceFloor. Throws
/// std::invalid_argument for an empty batch or fs <= 0.
EmgParams update_moments(const EmgParams& prev, std::span<const double> batch, int fs);

}  // namespace svguard
