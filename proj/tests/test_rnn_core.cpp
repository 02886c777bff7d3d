#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <stdexcept>

#include "svguard/rnn_core.hpp"
#include "svguard/rnn_io.hpp"

using namespace svguard::rnn;

namespace {

Sequence random_sequence(int steps, int width, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Sequence s;
  s.steps = steps;
  s.data.resize(static_cast<std::size_t>(steps * width));
  for (auto& v : s.data) v = g(rng);
  return s;
}

// Class 1 when the sequence's first feature has positive mean.
std::vector<Sample> separable(std::size_t n, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.target = static_cast<double>(i % 2);
    s.x.steps = steps;
    for (int t = 0; t < steps; ++t) {
      s.x.data.push_back((s.target > 0 ? 1.0 : -1.0) + 0.3 * g(rng));
      s.x.data.push_back(g(rng));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_SUITE("rnn_core") {

TEST_CASE("parameter count") {
  const RnnSpec lstm{CellKind::Lstm, 2, 8, 3, 1, HeadKind::Sigmoid};
  CHECK(lstm.param_count() == 4 * 8 * (3 + 8 + 1) + 4 * 8 * (8 + 8 + 1) + 8 + 1);
  const RnnSpec elman{CellKind::Elman, 5, 26, 135, 6, HeadKind::Softmax};
  CHECK(elman.param_count() == 26 * (135 + 26 + 1) + 4 * 26 * (26 + 26 + 1) + 6 * 26 + 6);
  CHECK_THROWS_AS((RnnSpec{CellKind::Lstm, 0, 8, 3, 1, HeadKind::Sigmoid}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((RnnSpec{CellKind::Lstm, 1, 8, 3, 2, HeadKind::Sigmoid}.validate()), std::invalid_argument);
}

TEST_CASE("zero weights give one half for any input") {
  std::mt19937_64 rng(1);
  for (auto cell : {CellKind::Lstm, CellKind::Elman}) {
    const auto w = zero_weights({cell, 2, 5, 3, 1, HeadKind::Sigmoid});
    CHECK(forward(w, random_sequence(7, 3, rng))[0] == 0.5);
  }
}

TEST_CASE("softmax outputs sum to one") {
  std::mt19937_64 rng(2);
  const auto w = init_weights({CellKind::Elman, 3, 6, 4, 5, HeadKind::Softmax}, 3);
  for (int i = 0; i < 20; ++i) {
    const auto p = forward(w, random_sequence(9, 4, rng));
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("single Elman unit matches the hand-computed recursion") {
  RnnWeights w = zero_weights({CellKind::Elman, 1, 1, 1, 1, HeadKind::Sigmoid});
  // W, U, b, Wo, bo
  w.params = {0.5, -0.3, 0.1, 2.0, -0.5};
  const Sequence x{{1.0, -2.0}, 2};
  // sigmoid(2 tanh(-2 * 0.5 - 0.3 tanh(0.6) + 0.1) - 0.5), mpmath
  CHECK(forward(w, x)[0] == doctest::Approx(0.111830292074468136899).epsilon(1e-14));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(4);
  for (auto cell : {CellKind::Lstm, CellKind::Elman}) {
    for (auto head : {HeadKind::Sigmoid, HeadKind::Softmax}) {
      const RnnSpec spec{cell, 2, 8, 3, head == HeadKind::Sigmoid ? 1 : 4, head};
      const auto w = init_weights(spec, 5);
      const auto x = random_sequence(10, 3, rng);
      const double target = head == HeadKind::Sigmoid ? 1.0 : 2.0;
      const auto r = gradient_check(w, x, target);
      const std::string net = std::string(to_string(cell)) + "/" + to_string(head);
      CAPTURE(net);
      CHECK(r.checked == spec.param_count());
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("head bias gradients cancel on a balanced batch at zero weights") {
  const auto w = zero_weights({CellKind::Elman, 1, 4, 2, 2, HeadKind::Softmax});
  const auto lay = layout(w.spec);
  std::mt19937_64 rng(6);
  std::vector<double> grad(w.params.size(), 0.0);
  for (double target : {0.0, 1.0}) {
    const auto x = random_sequence(5, 2, rng);
    Cache c;
    forward(w, x, c);
    backward(w, x, c, target, grad);
  }
  CHECK(grad[lay.head_b] + grad[lay.head_b + 1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(grad[lay.head_b] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("loss trends down under gradient descent") {
  const auto data = separable(64, 6, 7);
  auto w = init_weights({CellKind::Lstm, 1, 6, 2, 1, HeadKind::Sigmoid}, 8);
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    std::vector<double> grad(w.params.size(), 0.0);
    double total = 0;
    for (const auto& s : data) {
      Cache c;
      forward(w, s.x, c);
      total += backward(w, s.x, c, s.target, grad);
    }
    losses.push_back(total / static_cast<double>(data.size()));
    for (std::size_t i = 0; i < grad.size(); ++i) w.params[i] -= 0.5 * grad[i] / static_cast<double>(data.size());
  }
  CHECK(losses.back() < 0.5 * losses.front());
  for (std::size_t i = 10; i < losses.size(); i += 10) CHECK(losses[i] < losses[i - 10]);
}

TEST_CASE("training reaches full accuracy on a separable set and is deterministic") {
  const auto data = separable(200, 8, 9);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 10;
  cfg.patience = 200;
  for (auto cell : {CellKind::Lstm, CellKind::Elman}) {
    const RnnSpec spec{cell, 2, 6, 2, 1, HeadKind::Sigmoid};
    const auto a = train(spec, data, cfg);
    CHECK(accuracy(a.weights, data) >= 0.99);
    const auto b = train(spec, data, cfg);
    CHECK(a.weights.params == b.weights.params);
    CHECK(a.best_epoch == b.best_epoch);
  }
}

TEST_CASE("training errors") {
  const RnnSpec spec{CellKind::Lstm, 1, 4, 2, 1, HeadKind::Sigmoid};
  CHECK_THROWS_AS(train(spec, std::vector<Sample>{}, TrainConfig{}), std::invalid_argument);
  auto data = separable(10, 3, 1);
  data[0].target = 1.5;
  CHECK_THROWS_AS(train(spec, data, TrainConfig{}), std::invalid_argument);
  auto diverging = separable(10, 3, 1);
  diverging[0].x.data[0] = NAN;
  CHECK_THROWS_AS(train(spec, diverging, TrainConfig{}), TrainingDiverged);
  CHECK_THROWS_AS(forward(init_weights(spec, 1), Sequence{{1.0, 2.0, 3.0}, 1}), std::invalid_argument);
  CHECK_THROWS_AS(forward(init_weights(spec, 1), Sequence{{}, 0}), std::invalid_argument);
}

TEST_CASE("large standardized inputs stay finite") {
  std::mt19937_64 rng(11);
  for (auto cell : {CellKind::Lstm, CellKind::Elman}) {
    const auto w = init_weights({cell, 3, 8, 3, 3, HeadKind::Softmax}, 12);
    auto x = random_sequence(20, 3, rng);
    for (auto& v : x.data) v *= 1e3;
    for (double p : forward(w, x)) CHECK(std::isfinite(p));
  }
}

TEST_CASE("forward is pure") {
  std::mt19937_64 rng(13);
  const auto w = init_weights({CellKind::Lstm, 2, 5, 3, 1, HeadKind::Sigmoid}, 14);
  const auto x = random_sequence(6, 3, rng);
  CHECK(forward(w, x) == forward(w, x));
}

TEST_CASE("standardizer") {
  std::vector<Sample> data(2);
  data[0].x = Sequence{{1, 5, 3, 5}, 2};
  data[1].x = Sequence{{5, 5, 7, 5}, 2};
  const auto st = Standardizer::fit(data, 2);
  CHECK(st.mean == std::vector<double>{4, 5});
  CHECK(st.scale[0] == doctest::Approx(std::sqrt(5.0)));
  CHECK(st.scale[1] == 1.0);
  st.apply(data);
  CHECK(data[0].x.data[0] == doctest::Approx(-3 / std::sqrt(5.0)));
  CHECK(data[0].x.data[1] == 0.0);
  Sequence wrong{{1, 2, 3}, 1};
  CHECK_THROWS_AS(st.apply(wrong), std::invalid_argument);
}

TEST_CASE("weights round-trip through the binary format") {
  SavedModel m;
  m.weights = init_weights({CellKind::Elman, 2, 4, 3, 3, HeadKind::Softmax}, 15);
  m.seed = 15;
  m.extra = {{"note", "x"}};
  std::stringstream ss;
  save_model(ss, m);
  const auto back = load_model(ss);
  CHECK(back.weights.params == m.weights.params);
  CHECK(back.weights.spec.hidden_size == 4);
  CHECK(back.weights.spec.cell == CellKind::Elman);
  CHECK(back.seed == 15);
  CHECK(back.extra["note"] == "x");
  std::string bytes = ss.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_model(cut), std::runtime_error);
}

}
