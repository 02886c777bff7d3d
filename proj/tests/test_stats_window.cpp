#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "svguard/stats_window.hpp"

using namespace svguard;

namespace {

// Two-pass population moments in long double.
WindowStats reference(const std::vector<double>& x) {
  long double m = 0, m2 = 0, m3 = 0;
  for (double v : x) m += v;
  m /= x.size();
  for (double v : x) {
    const long double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= x.size();
  m3 /= x.size();
  WindowStats w;
  w.mean = static_cast<double>(m);
  w.std = static_cast<double>(std::sqrt(m2));
  w.skew = static_cast<double>(m3 / std::pow(m2, 1.5L));
  return w;
}

}  // namespace

TEST_SUITE("stats_window") {

TEST_CASE("single window statistics") {
  const std::vector<double> x = {1, 2, 3, 6};
  const auto w = window_stats(x);
  CHECK(w.mean == 3.0);
  CHECK(w.std == doctest::Approx(std::sqrt(3.5)));
  CHECK(w.skew == doctest::Approx(4.5 / std::pow(3.5, 1.5)));
  CHECK_FALSE(w.degenerate);
}

TEST_CASE("windows match a two-pass reference") {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(1.0 / 20e-6);
  std::vector<double> x(1050);
  for (auto& v : x) v = 300e-6 + e(rng);
  const auto ws = windows(x, 200, 50);
  REQUIRE(ws.size() == 18);  // (1050 - 200) / 50 + 1
  for (const auto& w : ws) {
    const std::vector<double> part(x.begin() + w.index * 50, x.begin() + w.index * 50 + 200);
    const auto r = reference(part);
    CHECK(w.mean == doctest::Approx(r.mean).epsilon(1e-13));
    CHECK(w.std == doctest::Approx(r.std).epsilon(1e-9));
    CHECK(w.skew == doctest::Approx(r.skew).epsilon(1e-7));
  }
}

TEST_CASE("window count and streaming agree") {
  std::vector<double> x(999);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.1 * static_cast<double>(i));
  std::vector<std::int64_t> t(x.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1000 * static_cast<std::int64_t>(i);
  const auto batch = windows(x, 100, 30, 2, t);
  CHECK(batch.size() == (999 - 100) / 30 + 1);
  SlidingWindows sw(100, 30, 2);
  std::vector<WindowStats> streamed;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (auto w = sw.push(x[i], t[i])) streamed.push_back(*w);
  REQUIRE(streamed.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(streamed[i].index == static_cast<std::int64_t>(i));
    CHECK(streamed[i].start_ns == t[i * 30]);
    CHECK(streamed[i].source == 2);
    CHECK(streamed[i].mean == doctest::Approx(batch[i].mean));
    CHECK(streamed[i].skew == doctest::Approx(batch[i].skew));
  }
  CHECK(windows(std::vector<double>(199, 1.0), 200, 50).empty());
  CHECK_THROWS_AS(SlidingWindows(10, 11), std::invalid_argument);
  CHECK_THROWS_AS(SlidingWindows(10, 0), std::invalid_argument);
}

TEST_CASE("constant window is degenerate") {
  const auto w = window_stats(std::vector<double>(200, 2.5e-4));
  CHECK(w.degenerate);
  CHECK(w.std == 0.0);
  CHECK(w.skew == 0.0);
  CHECK(w.mean == doctest::Approx(2.5e-4));
}

TEST_CASE("shift and scale invariance") {
  std::mt19937_64 rng(8);
  std::gamma_distribution<double> g(2.0, 1e-5);
  std::vector<double> x(300);
  for (auto& v : x) v = g(rng);
  const auto a = window_stats(x);
  for (auto& v : x) v = 3.0 * v + 1e-3;
  const auto b = window_stats(x);
  CHECK(b.mean == doctest::Approx(3.0 * a.mean + 1e-3));
  CHECK(b.std == doctest::Approx(3.0 * a.std).epsilon(1e-9));
  CHECK(b.skew == doctest::Approx(a.skew).epsilon(1e-6));
  for (auto& v : x) v = -v;
  CHECK(window_stats(x).skew == doctest::Approx(-a.skew).epsilon(1e-6));
}

TEST_CASE("CSV round trip") {
  std::vector<WindowStats> ws(3);
  for (int i = 0; i < 3; ++i) {
    ws[i].index = i;
    ws[i].source = 4;
    ws[i].mean = 1.234567891e-4 * (i + 1);
    ws[i].std = 2.5e-5 + i * 1e-7;
    ws[i].skew = 0.7 - i;
  }
  std::stringstream ss;
  write_stats_csv(ss, ws);
  CHECK(ss.str().rfind("t,source,m_us,s_us,g1\n", 0) == 0);
  const auto back = read_stats_csv(ss);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].index == i);
    CHECK(back[i].source == 4);
    CHECK(back[i].mean == doctest::Approx(ws[i].mean).epsilon(1e-15));
    CHECK(back[i].std == doctest::Approx(ws[i].std).epsilon(1e-15));
    CHECK(back[i].skew == doctest::Approx(ws[i].skew).epsilon(1e-15));
  }
  std::stringstream bad("t,source,m_us,s_us,g1\n0,1,2,3,4\n1,1,x,3,4\n");
  try {
    read_stats_csv(bad);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

}
