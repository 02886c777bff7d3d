#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "svguard/emg_model.hpp"

using namespace svguard;

namespace {

// 50-digit values from tests/oracles/emg_reference.py.
struct PdfCase {
  double x, mu, sigma, tau, pdf;
};
const PdfCase kPdf[] = {
    {0, 0, 1, 1, 0.26157829186512337168},
    {1, 0, 1, 1, 0.3032653298563167118},
    {-3, 0, 1, 1, 0.0010488074873968090418},
    {8, 0, 1, 1, 0.00055308437014712573879},
    {-10, 0, 1, 1, 6.9386562887281600755e-24},
    {30, 0, 1, 0.5, 1.2940469851290920652e-25},
    {300e-6, 250e-6, 10e-6, 20e-6, 4650.7086588916642567},
    {500e-6, 250e-6, 10e-6, 20e-6, 0.21114256385287636678},
    {200e-6, 250e-6, 10e-6, 20e-6, 0.013107141191065110987},
    {1e-3, 0, 1e-6, 100e-6, 0.45402199815723833825},
    {0.3, 0, 1, 0.05, 0.386205670708103261},
};

// Composite Simpson on [a, b] with n (even) panels.
template <typename F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_SUITE("emg_model") {

TEST_CASE("pdf matches high-precision reference values") {
  for (const auto& c : kPdf) {
    CAPTURE(c.x);
    CAPTURE(c.tau);
    CHECK(emg_pdf(c.x, c.mu, c.sigma, c.tau) == doctest::Approx(c.pdf).epsilon(1e-12));
  }
}

TEST_CASE("pdf far in the left tail underflows to a non-negative number") {
  const double p = emg_pdf(-40e-6, 0, 1e-6, 100e-6);
  CHECK(p >= 0.0);
  CHECK(p < 1e-300);
  CHECK(std::isfinite(emg_pdf(1.0, 0, 1e-9, 1e-3)));
}

TEST_CASE("pdf integrates to one") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const double sigma = 1e-6 * (1 + 100 * u(rng)), tau = 1e-6 * (1 + 100 * u(rng)), mu = 1e-4 * u(rng);
    const double a = mu - 12 * sigma, b = mu + 12 * sigma + 60 * tau;
    CHECK(simpson([&](double x) { return emg_pdf(x, mu, sigma, tau); }, a, b, 200000) ==
          doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("theoretical moments and MME round trip") {
  const auto m = theoretical_moments(2.0, 0.5, 1.5);
  CHECK(m.m1 == 3.5);
  CHECK(m.m2 == doctest::Approx(2.5));
  CHECK(m.m3 == doctest::Approx(6.75));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lr(std::log(0.05), std::log(20.0));
  for (int i = 0; i < 200; ++i) {
    const double tau = 20e-6, sigma = tau * std::exp(lr(rng)), mu = 300e-6;
    const auto mm = theoretical_moments(mu, sigma, tau);
    const auto p = estimate_mme(mm.m1, mm.m2, mm.m3);
    CHECK_FALSE(p.clamped);
    CHECK(p.mu == doctest::Approx(mu).epsilon(1e-10));
    CHECK(p.sigma == doctest::Approx(sigma).epsilon(1e-10));
    CHECK(p.tau == doctest::Approx(tau).epsilon(1e-10));
  }
}

TEST_CASE("MME on explicit moments") {
  // Reference values from tests/oracles/emg_reference.py.
  auto p = estimate_mme(1, 1, 1);
  CHECK(p.mu == doctest::Approx(0.20629947401590026262).epsilon(1e-13));
  CHECK(p.sigma == doctest::Approx(0.60830870045772271333).epsilon(1e-13));
  CHECK(p.tau == doctest::Approx(0.79370052598409973738).epsilon(1e-13));
  p = estimate_mme(3e-4, 1e-10, 5e-16);
  CHECK(p.mu == doctest::Approx(0.00029370039475052563418).epsilon(1e-12));
  CHECK(p.sigma == doctest::Approx(7.7662715443638083708e-6).epsilon(1e-12));
  CHECK(p.tau == doctest::Approx(6.2996052494743658238e-6).epsilon(1e-12));
}

TEST_CASE("skewness at the exponential limit is clamped") {
  const auto p = estimate_mme(1, 1, 2);
  CHECK(p.clamped);
  CHECK(p.mu == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(p.sigma < 1e-3);
  CHECK(p.tau == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("non-positive skewness is clamped to the floor") {
  const auto p = estimate_mme(5, 4, -1);
  CHECK(p.clamped);
  CHECK(p.skewness() == doctest::Approx(kSkewMin).epsilon(1e-9));
  CHECK(p.expected_value() == doctest::Approx(5.0));
  CHECK(p.variance() == doctest::Approx(4.0));
  CHECK_THROWS_AS(estimate_mme(0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_mme(0, NAN, 0), std::invalid_argument);
}

TEST_CASE("moment update weights the prior by FS and the batch by k") {
  EmgParams prev = estimate_mme(2e-6, 1e-10, 1e-16);
  const std::vector<double> batch(1000, 7e-6);
  const auto next = update_moments(prev, batch, 4000);
  CHECK(next.m1 == doctest::Approx(3e-6).epsilon(1e-12));
  CHECK(next.m2 == doctest::Approx(0.8e-10).epsilon(1e-12));
  CHECK_THROWS_AS(update_moments(prev, std::vector<double>{}, 4000), std::invalid_argument);
}

TEST_CASE("moment update converges to the batch distribution") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 10e-6);
  std::exponential_distribution<double> e(1.0 / 20e-6);
  EmgParams p = estimate_mme(0.0, 1e-8, 1e-12);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> batch(1000);
    for (auto& x : batch) x = 100e-6 + g(rng) + e(rng);
    p = update_moments(p, batch, 4800);
  }
  CHECK(p.expected_value() == doctest::Approx(120e-6).epsilon(0.01));
  CHECK(p.full_std() == doctest::Approx(std::sqrt(500.0) * 1e-6).epsilon(0.03));
  CHECK(p.tau == doctest::Approx(20e-6).epsilon(0.1));
}

TEST_CASE("batch equal to the prior moments is a fixed point") {
  const std::vector<double> batch = {1.0, 2.0, 4.0, 8.0};
  const auto b = batch_moments(batch);
  EmgParams prev = estimate_mme(b.m1, b.m2, b.m3);
  const auto next = update_moments(prev, batch, 4800);
  CHECK(next.m1 == doctest::Approx(prev.m1));
  CHECK(next.m2 == doctest::Approx(prev.m2));
  CHECK(next.m3 == doctest::Approx(prev.m3));
}

TEST_CASE("slot timing and arrival shift") {
  const StreamTiming t(4800);
  CHECK(t.slot_offset_ns(0) == 0);
  CHECK(t.slot_offset_ns(1) == 208333);
  CHECK(t.slot_offset_ns(2) == 416667);
  CHECK(t.expected_ns(3, 4799) == 3'000'000'000LL + 999'791'667LL);
  CHECK_THROWS_AS(StreamTiming(0), std::invalid_argument);

  // 150 us after slot (5, 10).
  const std::int64_t arr = t.expected_ns(5, 10) + 150'000;
  auto s = arrival_shift(arr, 10, t, 150e-6);
  CHECK(s.shift_ns == 150'000);
  CHECK(s.second_index == 5);
  // A mean near -1 s puts the frame in the next second.
  s = arrival_shift(arr, 10, t, -0.9);
  CHECK(s.second_index == 6);
  CHECK(s.shift_ns == 150'000 - 1'000'000'000LL);
  // Counter 4799 arriving just after the second boundary belongs to the
  // previous second.
  s = arrival_shift(6'000'000'000LL + 10'000, 4799, t, 0.0);
  CHECK(s.second_index == 5);
  CHECK(s.shift_ns == 218'333);
  CHECK_THROWS_AS(arrival_shift(arr, 4800, t, 0.0), std::out_of_range);
}

TEST_CASE("erfcx") {
  CHECK(erfcx(0.0) == doctest::Approx(1.0));
  CHECK(erfcx(30.0) == doctest::Approx(0.018795888861416751).epsilon(1e-12));
  CHECK(erfcx(-2.0) == doctest::Approx(108.94090438997797).epsilon(1e-12));
}

}
