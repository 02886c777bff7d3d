#include <doctest.h>

#include <sstream>
#include <stdexcept>

#include "svguard/metrics.hpp"

using namespace svguard;

TEST_SUITE("metrics") {

TEST_CASE("binary metrics from counts") {
  BinaryCounts c;
  c.tp = 90;
  c.fn = 10;
  c.fp = 5;
  c.tn = 895;
  const auto m = binary_metrics(c);
  CHECK(m.tpr.value() == doctest::Approx(0.9));
  CHECK(m.fpr.value() == doctest::Approx(5.0 / 900));
  CHECK(m.precision.value() == doctest::Approx(90.0 / 95));
  CHECK(m.f1.value() == doctest::Approx(180.0 / 195));
}

TEST_CASE("F1 from detection rates and frame counts") {
  // tpr 99.74 % of 19201 malicious, fpr 0.42 % of 43124 legitimate frames.
  BinaryCounts c;
  c.tp = 19151;
  c.fn = 50;
  c.fp = 181;
  c.tn = 43124 - 181;
  auto m = binary_metrics(c);
  CHECK(m.f1.value() == doctest::Approx(0.9941).epsilon(2e-4));
  CHECK(m.precision.value() == doctest::Approx(0.9907).epsilon(2e-4));
  c.tp = 18913;
  c.fn = 288;
  c.fp = 289;
  m = binary_metrics(c);
  CHECK(m.f1.value() == doctest::Approx(0.9849).epsilon(2e-4));
}

TEST_CASE("undefined rates are empty") {
  BinaryCounts c;
  c.tn = 10;
  const auto m = binary_metrics(c);
  CHECK_FALSE(m.tpr);
  CHECK_FALSE(m.precision);
  CHECK_FALSE(m.f1);
  CHECK(m.fpr.value() == 0.0);
  const auto j = to_json(m);
  CHECK(j["tpr"].is_null());
  CHECK(j["fpr"] == 0.0);
}

TEST_CASE("counting by label") {
  BinaryCounts c;
  c.add(Label::Malicious, true);
  c.add(Label::Malicious, false);
  c.add(Label::Legitimate, true);
  c.add(Label::Legitimate, false);
  c.add(Label::Legitimate, false);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 2);
  CHECK_THROWS_AS(c.add(Label::Unknown, true), std::invalid_argument);
}

TEST_CASE("confusion matrix") {
  ConfusionMatrix m(3);
  m.add(0, 0);
  m.add(0, 0);
  m.add(1, 1);
  m.add(1, 2);
  m.add(2, 2);
  CHECK(m.total() == 5);
  CHECK(m.accuracy().value() == doctest::Approx(0.8));
  CHECK(m.recall(1).value() == doctest::Approx(0.5));
  CHECK(m.precision(2).value() == doctest::Approx(0.5));
  CHECK(m.f1(0).value() == 1.0);
  CHECK(m.macro_recall().value() == doctest::Approx(2.5 / 3));
  std::ostringstream os;
  m.write_csv(os);
  CHECK(os.str() == "truth\\pred,0,1,2\n0,2,0,0\n1,0,1,1\n2,0,0,1\n");
  CHECK_THROWS(m.add(3, 0));
  CHECK_FALSE(ConfusionMatrix(2).accuracy());
}

}
