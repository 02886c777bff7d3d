#include "svguard/rnn_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "svguard/simd/kernels.hpp"

namespace svguard::rnn {

const char* to_string(CellKind k) { return k == CellKind::Lstm ? "lstm" : "elman"; }
const char* to_string(HeadKind k) { return k == HeadKind::Sigmoid ? "sigmoid" : "softmax"; }

void RnnSpec::validate() const {
  if (num_layers < 1 || hidden_size < 1 || input_size < 1 || n_out < 1)
    throw std::invalid_argument("rnn spec sizes must be positive");
  if (head == HeadKind::Sigmoid && n_out != 1) throw std::invalid_argument("sigmoid head needs n_out == 1");
  if (head == HeadKind::Softmax && n_out < 2) throw std::invalid_argument("softmax head needs n_out >= 2");
}

Layout layout(const RnnSpec& spec) {
  spec.validate();
  Layout out;
  const std::size_t H = static_cast<std::size_t>(spec.hidden_size);
  const std::size_t GH = static_cast<std::size_t>(spec.gates()) * H;
  std::size_t off = 0;
  for (int l = 0; l < spec.num_layers; ++l) {
    LayerView v;
    v.in = l == 0 ? spec.input_size : spec.hidden_size;
    v.w = off;
    off += GH * static_cast<std::size_t>(v.in);
    v.u = off;
    off += GH * H;
    v.b = off;
    off += GH;
    out.layers.push_back(v);
  }
  out.head_w = off;
  off += static_cast<std::size_t>(spec.n_out) * H;
  out.head_b = off;
  off += static_cast<std::size_t>(spec.n_out);
  out.total = off;
  return out;
}

std::size_t RnnSpec::param_count() const { return layout(*this).total; }

RnnWeights zero_weights(const RnnSpec& spec) { return RnnWeights{spec, std::vector<double>(spec.param_count(), 0.0)}; }

RnnWeights init_weights(const RnnSpec& spec, std::uint64_t seed) {
  const Layout lay = layout(spec);
  RnnWeights w{spec, std::vector<double>(lay.total, 0.0)};
  std::mt19937_64 rng(seed);
  const std::size_t H = static_cast<std::size_t>(spec.hidden_size);
  const std::size_t GH = static_cast<std::size_t>(spec.gates()) * H;
  auto fill = [&](std::size_t off, std::size_t n, int fan_in) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-r, r);
    for (std::size_t i = 0; i < n; ++i) w.params[off + i] = u(rng);
  };
  for (const auto& v : lay.layers) {
    fill(v.w, GH * static_cast<std::size_t>(v.in), v.in);
    fill(v.u, GH * H, spec.hidden_size);
    if (spec.cell == CellKind::Lstm)
      for (std::size_t j = 0; j < H; ++j) w.params[v.b + H + j] = 1.0;
  }
  fill(lay.head_w, static_cast<std::size_t>(spec.n_out) * H, spec.hidden_size);
  return w;
}

namespace {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// y = A x + y, A row-major [rows x cols]
inline void matvec_acc(const double* A, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += simd::dot(A + r * cols, x, cols);
}

// x += A^T d
inline void matvec_t_acc(const double* A, const double* d, double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    if (d[r] != 0.0) simd::axpy(d[r], A + r * cols, x, cols);
}

// G += d x^T
inline void outer_acc(const double* d, const double* x, double* G, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    if (d[r] != 0.0) simd::axpy(d[r], x, G + r * cols, cols);
}

void check_input(const RnnSpec& spec, const Sequence& x) {
  if (x.steps <= 0) throw std::invalid_argument("empty sequence");
  if (x.data.size() != static_cast<std::size_t>(x.steps) * static_cast<std::size_t>(spec.input_size))
    throw std::invalid_argument("sequence width does not match the network input size");
}

}  // namespace

std::vector<double> forward(const RnnWeights& w, const Sequence& x) {
  Cache cache;
  return forward(w, x, cache);
}

std::vector<double> forward(const RnnWeights& w, const Sequence& x, Cache& cache) {
  const RnnSpec& spec = w.spec;
  check_input(spec, x);
  const Layout lay = layout(spec);
  if (w.params.size() != lay.total) throw std::invalid_argument("weight vector does not match the spec");

  const std::size_t T = static_cast<std::size_t>(x.steps);
  const std::size_t H = static_cast<std::size_t>(spec.hidden_size);
  const std::size_t GH = static_cast<std::size_t>(spec.gates()) * H;
  const std::size_t L = static_cast<std::size_t>(spec.num_layers);
  const double* P = w.params.data();
  const bool lstm = spec.cell == CellKind::Lstm;

  cache.steps = x.steps;
  cache.h.assign(L, std::vector<double>((T + 1) * H, 0.0));
  cache.c.assign(lstm ? L : 0, std::vector<double>((T + 1) * H, 0.0));
  cache.gates.assign(lstm ? L : 0, std::vector<double>(T * GH, 0.0));

  std::vector<double> a(GH);
  for (std::size_t l = 0; l < L; ++l) {
    const LayerView& v = lay.layers[l];
    const std::size_t in = static_cast<std::size_t>(v.in);
    auto& h = cache.h[l];
    for (std::size_t t = 0; t < T; ++t) {
      const double* xt = l == 0 ? x.data.data() + t * in : cache.h[l - 1].data() + (t + 1) * H;
      const double* hprev = h.data() + t * H;
      std::copy(P + v.b, P + v.b + GH, a.begin());
      matvec_acc(P + v.w, xt, a.data(), GH, in);
      matvec_acc(P + v.u, hprev, a.data(), GH, H);
      double* hn = h.data() + (t + 1) * H;
      if (lstm) {
        double* g = cache.gates[l].data() + t * GH;
        const double* cprev = cache.c[l].data() + t * H;
        double* cn = cache.c[l].data() + (t + 1) * H;
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = sigmoid(a[j]);
          const double fg = sigmoid(a[H + j]);
          const double gg = std::tanh(a[2 * H + j]);
          const double og = sigmoid(a[3 * H + j]);
          g[j] = ig;
          g[H + j] = fg;
          g[2 * H + j] = gg;
          g[3 * H + j] = og;
          cn[j] = fg * cprev[j] + ig * gg;
          hn[j] = og * std::tanh(cn[j]);
        }
      } else {
        for (std::size_t j = 0; j < H; ++j) hn[j] = std::tanh(a[j]);
      }
    }
  }

  const std::size_t K = static_cast<std::size_t>(spec.n_out);
  std::vector<double> z(P + lay.head_b, P + lay.head_b + K);
  matvec_acc(P + lay.head_w, cache.h[L - 1].data() + T * H, z.data(), K, H);
  if (spec.head == HeadKind::Sigmoid) {
    z[0] = sigmoid(z[0]);
  } else {
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (auto& v : z) s += (v = std::exp(v - mx));
    for (auto& v : z) v /= s;
  }
  cache.out = z;
  return z;
}

double loss(const RnnSpec& spec, std::span<const double> out, double target) {
  constexpr double kTiny = 1e-300;
  if (spec.head == HeadKind::Sigmoid) {
    const double p = out[0];
    return -(target * std::log(std::max(p, kTiny)) + (1.0 - target) * std::log(std::max(1.0 - p, kTiny)));
  }
  const auto k = static_cast<std::size_t>(target);
  return -std::log(std::max(out[k], kTiny));
}

double backward(const RnnWeights& w, const Sequence& x, const Cache& cache, double target, std::span<double> grad) {
  const RnnSpec& spec = w.spec;
  const Layout lay = layout(spec);
  if (grad.size() != lay.total) throw std::invalid_argument("gradient buffer does not match the spec");
  if (cache.steps != x.steps || cache.h.size() != static_cast<std::size_t>(spec.num_layers))
    throw std::invalid_argument("cache does not belong to this sequence");

  const std::size_t T = static_cast<std::size_t>(x.steps);
  const std::size_t H = static_cast<std::size_t>(spec.hidden_size);
  const std::size_t GH = static_cast<std::size_t>(spec.gates()) * H;
  const std::size_t L = static_cast<std::size_t>(spec.num_layers);
  const std::size_t K = static_cast<std::size_t>(spec.n_out);
  const double* P = w.params.data();
  double* G = grad.data();
  const bool lstm = spec.cell == CellKind::Lstm;

  const double value = loss(spec, cache.out, target);
  if (!std::isfinite(value)) throw std::runtime_error("non-finite loss");

  // Both heads with their matching loss give d loss / d logits = p - y.
  std::vector<double> dz(cache.out);
  if (spec.head == HeadKind::Sigmoid)
    dz[0] -= target;
  else
    dz[static_cast<std::size_t>(target)] -= 1.0;

  const double* htop = cache.h[L - 1].data() + T * H;
  outer_acc(dz.data(), htop, G + lay.head_w, K, H);
  for (std::size_t k = 0; k < K; ++k) G[lay.head_b + k] += dz[k];

  // dh_in[t]: gradient reaching layer l's h_t from above (or from the head).
  std::vector<double> dh_in(T * H, 0.0);
  matvec_t_acc(P + lay.head_w, dz.data(), dh_in.data() + (T - 1) * H, K, H);

  std::vector<double> dh_next(H), dc_next(H), da(GH), dh(H);
  for (std::size_t li = L; li-- > 0;) {
    const LayerView& v = lay.layers[li];
    const std::size_t in = static_cast<std::size_t>(v.in);
    const auto& h = cache.h[li];
    std::vector<double> dx(li > 0 ? T * in : 0, 0.0);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);

    for (std::size_t t = T; t-- > 0;) {
      for (std::size_t j = 0; j < H; ++j) dh[j] = dh_in[t * H + j] + dh_next[j];
      const double* hn = h.data() + (t + 1) * H;
      if (lstm) {
        const double* g = cache.gates[li].data() + t * GH;
        const double* cprev = cache.c[li].data() + t * H;
        const double* cn = cache.c[li].data() + (t + 1) * H;
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = g[j], fg = g[H + j], gg = g[2 * H + j], og = g[3 * H + j];
          const double tc = std::tanh(cn[j]);
          const double dc = dc_next[j] + dh[j] * og * (1.0 - tc * tc);
          da[j] = dc * gg * ig * (1.0 - ig);
          da[H + j] = dc * cprev[j] * fg * (1.0 - fg);
          da[2 * H + j] = dc * ig * (1.0 - gg * gg);
          da[3 * H + j] = dh[j] * tc * og * (1.0 - og);
          dc_next[j] = dc * fg;
        }
      } else {
        for (std::size_t j = 0; j < H; ++j) da[j] = dh[j] * (1.0 - hn[j] * hn[j]);
      }

      const double* xt = li == 0 ? x.data.data() + t * in : cache.h[li - 1].data() + (t + 1) * H;
      const double* hprev = h.data() + t * H;
      outer_acc(da.data(), xt, G + v.w, GH, in);
      outer_acc(da.data(), hprev, G + v.u, GH, H);
      for (std::size_t r = 0; r < GH; ++r) G[v.b + r] += da[r];

      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      matvec_t_acc(P + v.u, da.data(), dh_next.data(), GH, H);
      if (li > 0) matvec_t_acc(P + v.w, da.data(), dx.data() + t * in, GH, in);
    }
    if (li > 0) dh_in.swap(dx);
  }
  return value;
}

GradientCheck gradient_check(const RnnWeights& w, const Sequence& x, double target, double eps, double floor) {
  Cache cache;
  forward(w, x, cache);
  std::vector<double> grad(w.params.size(), 0.0);
  backward(w, x, cache, target, grad);

  GradientCheck r;
  RnnWeights probe = w;
  for (std::size_t i = 0; i < probe.params.size(); ++i) {
    const double orig = probe.params[i];
    probe.params[i] = orig + eps;
    const double up = loss(w.spec, forward(probe, x), target);
    probe.params[i] = orig - eps;
    const double down = loss(w.spec, forward(probe, x), target);
    probe.params[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(grad[i]), std::abs(numeric), floor});
    const double rel = std::abs(grad[i] - numeric) / denom;
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst_index = i;
    }
    ++r.checked;
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void check_targets(const RnnSpec& spec, std::span<const Sample> data) {
  for (const auto& s : data) {
    check_input(spec, s.x);
    if (spec.head == HeadKind::Sigmoid) {
      if (!(s.target >= 0.0 && s.target <= 1.0)) throw std::invalid_argument("sigmoid target outside [0,1]");
    } else if (s.target < 0 || s.target >= spec.n_out || s.target != std::floor(s.target)) {
      throw std::invalid_argument("class target outside [0, n_out)");
    }
  }
}

bool correct(const RnnSpec& spec, const std::vector<double>& out, double target) {
  if (spec.head == HeadKind::Sigmoid) return (out[0] >= 0.5) == (target >= 0.5);
  const auto k = static_cast<double>(std::max_element(out.begin(), out.end()) - out.begin());
  return k == target;
}

struct Eval {
  double loss = 0.0;
  double acc = 0.0;
};

Eval evaluate(const RnnWeights& w, std::span<const Sample> data, const std::vector<std::size_t>& idx) {
  Eval e;
  Cache cache;
  for (auto i : idx) {
    const auto out = forward(w, data[i].x, cache);
    e.loss += loss(w.spec, out, data[i].target);
    e.acc += correct(w.spec, out, data[i].target) ? 1.0 : 0.0;
  }
  if (!idx.empty()) {
    e.loss /= static_cast<double>(idx.size());
    e.acc /= static_cast<double>(idx.size());
  }
  return e;
}

}  // namespace

TrainResult train(const RnnSpec& spec, std::span<const Sample> data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  spec.validate();
  if (data.empty()) throw std::invalid_argument("empty training set");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (cfg.batch_size < 1 || cfg.epochs < 1) throw std::invalid_argument("batch size and epochs must be positive");
  check_targets(spec, data);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(data.size()));
  if (n_val >= data.size()) n_val = 0;
  std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> tr(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  if (val.empty()) val = tr;

  TrainResult res;
  RnnWeights w = init_weights(spec, rng());
  const std::size_t P = w.params.size();
  std::vector<double> grad(P), m1(P, 0.0), m2(P, 0.0);
  Cache cache;

  double best = std::numeric_limits<double>::infinity();
  res.weights = w;
  int since_best = 0;
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(tr.begin(), tr.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < tr.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(tr.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = data[tr[k]];
        forward(w, s.x, cache);
        const double l = loss(spec, cache.out, s.target);
        if (!std::isfinite(l))
          throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch));
        backward(w, s.x, cache, s.target, grad);
        total += l;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : grad) g *= inv;
      if (cfg.clip_norm > 0.0) {
        const double norm = std::sqrt(simd::dot(grad.data(), grad.data(), P));
        if (norm > cfg.clip_norm)
          for (auto& g : grad) g *= cfg.clip_norm / norm;
      }
      ++step;
      if (cfg.optimizer == Optimizer::Adam) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        for (std::size_t i = 0; i < P; ++i) {
          m1[i] = b1 * m1[i] + (1 - b1) * grad[i];
          m2[i] = b2 * m2[i] + (1 - b2) * grad[i] * grad[i];
          w.params[i] -= cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
        }
      } else if (cfg.momentum > 0.0) {
        for (std::size_t i = 0; i < P; ++i) {
          m1[i] = cfg.momentum * m1[i] + grad[i];
          w.params[i] -= cfg.learning_rate * m1[i];
        }
      } else {
        simd::axpy(-cfg.learning_rate, grad.data(), w.params.data(), P);
      }
    }

    const Eval ev = evaluate(w, data, val);
    if (!std::isfinite(ev.loss)) throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch));
    EpochRecord rec{epoch, total / static_cast<double>(tr.size()), ev.loss, ev.acc};
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (ev.loss < best) {
      best = ev.loss;
      res.weights = w;
      res.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return res;
}

double accuracy(const RnnWeights& w, std::span<const Sample> data) {
  if (data.empty()) return 0.0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return evaluate(w, data, idx).acc;
}

Standardizer Standardizer::fit(std::span<const Sample> data, int input_size) {
  const auto d = static_cast<std::size_t>(input_size);
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  double n = 0.0;
  for (const auto& s : data)
    for (std::size_t i = 0; i + d <= s.x.data.size(); i += d) {
      for (std::size_t j = 0; j < d; ++j) sum[j] += s.x.data[i + j];
      n += 1.0;
    }
  Standardizer st;
  st.mean.assign(d, 0.0);
  st.scale.assign(d, 1.0);
  if (n == 0.0) return st;
  for (std::size_t j = 0; j < d; ++j) st.mean[j] = sum[j] / n;
  for (const auto& s : data)
    for (std::size_t i = 0; i + d <= s.x.data.size(); i += d)
      for (std::size_t j = 0; j < d; ++j) {
        const double e = s.x.data[i + j] - st.mean[j];
        sq[j] += e * e;
      }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(sq[j] / n);
    st.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return st;
}

void Standardizer::apply(Sequence& x) const {
  if (empty()) throw std::invalid_argument("standardizer has no constants");
  const std::size_t d = mean.size();
  if (x.data.size() != static_cast<std::size_t>(x.steps) * d)
    throw std::invalid_argument("sequence width does not match the standardizer");
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = (x.data[i] - mean[i % d]) / scale[i % d];
}

void Standardizer::apply(std::vector<Sample>& data) const {
  for (auto& s : data) apply(s.x);
}

}  // namespace svguard::rnn
