#include "lamner/nn.hpp"

#include <algorithm>
#include <cmath>

#include "lamner/error.hpp"

namespace lamner::nn {

namespace {

void check_size(std::span<const double> v, std::size_t expected, const char* what,
                const std::string& owner) {
  if (v.size() != expected) {
    throw DimensionError(owner + ": " + what + " has size " + std::to_string(v.size()) +
                         ", expected " + std::to_string(expected));
  }
}

}  // namespace

void Param::init_uniform(std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& v : value.data()) v = rng.uniform(-bound, bound);
}

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

void Linear::init(Rng& rng) {
  weight.init_uniform(in(), rng);
  bias.init_uniform(in(), rng);
}

Vec Linear::forward(std::span<const double> x) const {
  check_size(x, in(), "input", weight.name);
  Vec y(bias.value.data().begin(), bias.value.data().end());
  matvec_acc(weight.value, x, y);
  return y;
}

void Linear::backward(std::span<const double> x, std::span<const double> dy,
                      std::span<double> dx) {
  outer_acc(dy, x, weight.grad);
  axpy(1.0, dy, bias.grad.data());
  if (!dx.empty()) matvec_t_acc(weight.value, dy, dx);
}

Embedding::Embedding(const std::string& name, std::size_t count, std::size_t dim)
    : table(name, count, dim) {}

void Embedding::backward(std::size_t index, std::span<const double> dy) {
  axpy(1.0, dy, table.grad.row(index));
}

LstmCell::LstmCell(const std::string& name, std::size_t input, std::size_t hidden)
    : w(name + ".w", 4 * hidden, input),
      u(name + ".u", 4 * hidden, hidden),
      b(name + ".b", 4 * hidden, 1) {}

void LstmCell::init(Rng& rng) {
  w.init_uniform(hidden_size(), rng);
  u.init_uniform(hidden_size(), rng);
  b.init_uniform(hidden_size(), rng);
}

void LstmCell::step(std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev, Cache& cache) const {
  const std::size_t h = hidden_size();
  check_size(x, input_size(), "input", w.name);
  check_size(h_prev, h, "h_prev", w.name);
  check_size(c_prev, h, "c_prev", w.name);

  Vec a(b.value.data().begin(), b.value.data().end());
  matvec_acc(w.value, x, a);
  matvec_acc(u.value, h_prev, a);

  cache.x.assign(x.begin(), x.end());
  cache.h_prev.assign(h_prev.begin(), h_prev.end());
  cache.c_prev.assign(c_prev.begin(), c_prev.end());
  cache.i.resize(h);
  cache.f.resize(h);
  cache.o.resize(h);
  cache.g.resize(h);
  cache.c.resize(h);
  cache.tanh_c.resize(h);
  cache.h.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    cache.i[k] = sigmoid(a[k]);
    cache.f[k] = sigmoid(a[h + k]);
    cache.o[k] = sigmoid(a[2 * h + k]);
    cache.g[k] = std::tanh(a[3 * h + k]);
    cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    cache.h[k] = cache.o[k] * cache.tanh_c[k];
  }
}

void LstmCell::backward(const Cache& cache, std::span<const double> dh,
                        std::span<const double> dc, std::span<double> dx,
                        std::span<double> dh_prev, std::span<double> dc_prev) {
  const std::size_t h = hidden_size();
  Vec da(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double tc = cache.tanh_c[k];
    const double dct = dc[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
    const double di = dct * cache.g[k];
    const double df = dct * cache.c_prev[k];
    const double dout = dh[k] * tc;
    const double dg = dct * cache.i[k];
    dc_prev[k] = dct * cache.f[k];
    da[k] = di * cache.i[k] * (1.0 - cache.i[k]);
    da[h + k] = df * cache.f[k] * (1.0 - cache.f[k]);
    da[2 * h + k] = dout * cache.o[k] * (1.0 - cache.o[k]);
    da[3 * h + k] = dg * (1.0 - cache.g[k] * cache.g[k]);
  }
  outer_acc(da, cache.x, w.grad);
  outer_acc(da, cache.h_prev, u.grad);
  axpy(1.0, da, b.grad.data());
  if (!dx.empty()) matvec_t_acc(w.value, da, dx);
  matvec_t_acc(u.value, da, dh_prev);
}

GruCell::GruCell(const std::string& name, std::size_t input, std::size_t hidden)
    : w(name + ".w", 3 * hidden, input),
      u(name + ".u", 3 * hidden, hidden),
      b(name + ".b", 3 * hidden, 1) {}

void GruCell::init(Rng& rng) {
  w.init_uniform(hidden_size(), rng);
  u.init_uniform(hidden_size(), rng);
  b.init_uniform(hidden_size(), rng);
}

void GruCell::step(std::span<const double> x, std::span<const double> h_prev,
                   Cache& cache) const {
  const std::size_t h = hidden_size();
  check_size(x, input_size(), "input", w.name);
  check_size(h_prev, h, "h_prev", w.name);

  Vec a(b.value.data().begin(), b.value.data().end());
  matvec_acc(w.value, x, a);
  // Only the update and reset blocks see h_prev directly.
  matvec_acc(u.value, h_prev, std::span<double>(a).subspan(0, 2 * h), 0);

  cache.x.assign(x.begin(), x.end());
  cache.h_prev.assign(h_prev.begin(), h_prev.end());
  cache.z.resize(h);
  cache.r.resize(h);
  cache.n.resize(h);
  cache.rh.resize(h);
  cache.h.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    cache.z[k] = sigmoid(a[k]);
    cache.r[k] = sigmoid(a[h + k]);
    cache.rh[k] = cache.r[k] * h_prev[k];
  }
  matvec_acc(u.value, cache.rh, std::span<double>(a).subspan(2 * h, h), 2 * h);
  for (std::size_t k = 0; k < h; ++k) {
    cache.n[k] = std::tanh(a[2 * h + k]);
    cache.h[k] = (1.0 - cache.z[k]) * h_prev[k] + cache.z[k] * cache.n[k];
  }
}

void GruCell::backward(const Cache& cache, std::span<const double> dh, std::span<double> dx,
                       std::span<double> dh_prev) {
  const std::size_t h = hidden_size();
  Vec da(3 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double z = cache.z[k];
    const double n = cache.n[k];
    dh_prev[k] += dh[k] * (1.0 - z);
    const double dz = dh[k] * (n - cache.h_prev[k]);
    const double dn = dh[k] * z;
    da[k] = dz * z * (1.0 - z);
    da[2 * h + k] = dn * (1.0 - n * n);
  }
  std::span<const double> da_n = std::span<const double>(da).subspan(2 * h, h);
  Vec drh(h, 0.0);
  matvec_t_acc(u.value, da_n, drh, 2 * h);
  outer_acc(da_n, cache.rh, u.grad, 2 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double r = cache.r[k];
    dh_prev[k] += drh[k] * r;
    const double dr = drh[k] * cache.h_prev[k];
    da[h + k] = dr * r * (1.0 - r);
  }
  std::span<const double> da_zr = std::span<const double>(da).subspan(0, 2 * h);
  outer_acc(da_zr, cache.h_prev, u.grad, 0);
  matvec_t_acc(u.value, da_zr, dh_prev, 0);
  outer_acc(da, cache.x, w.grad);
  axpy(1.0, da, b.grad.data());
  if (!dx.empty()) matvec_t_acc(w.value, da, dx);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -INFINITY;
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

Vec softmax(std::span<const double> logits) {
  Vec p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

XentResult softmax_xent(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw DimensionError("softmax_xent: target " + std::to_string(target) + " out of range");
  }
  XentResult out;
  out.loss = log_sum_exp(logits) - logits[target];
  out.grad = softmax(logits);
  out.grad[target] -= 1.0;
  return out;
}

Vec dropout_mask(std::size_t n, double rate, Rng& rng) {
  Vec mask(n, 1.0);
  if (rate <= 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

void apply_mask(std::span<double> x, std::span<const double> mask) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

double grad_norm(const ParamList& params) {
  double sq = 0.0;
  for (const Param* p : params) {
    if (p->frozen) continue;
    for (double g : p->grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double sgd_step(const ParamList& params, const SgdOptions& options) {
  for (const Param* p : params) {
    if (p->frozen) continue;
    if (!p->grad.all_finite()) throw Error("non-finite gradient in parameter " + p->name);
  }
  const double norm = grad_norm(params);
  double scale = options.learning_rate;
  if (options.clip_norm > 0.0 && norm > options.clip_norm) scale *= options.clip_norm / norm;
  if (scale == 0.0) return norm;
  for (Param* p : params) {
    if (p->frozen) continue;
    auto v = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= scale * g[i];
  }
  return norm;
}

OptimizerState plateau_decay(OptimizerState state, double valid_loss) {
  ++state.epoch;
  if (valid_loss < state.best_valid_loss) {
    state.best_valid_loss = valid_loss;
    state.epochs_since_improvement = 0;
  } else if (++state.epochs_since_improvement >= state.patience) {
    state.learning_rate = std::max(state.learning_rate * state.decay_factor, state.floor);
    state.epochs_since_improvement = 0;
  }
  // The rate is clamped at the floor, so reaching it (up to rounding of the
  // repeated products) ends training.
  const bool at_floor = state.learning_rate <= state.floor * (1.0 + 1e-9);
  state.halted = at_floor || state.epoch >= state.max_epochs;
  return state;
}

double grad_check(const std::function<long double()>& loss, const std::function<void()>& compute_grads,
                  const ParamList& params, const GradCheckOptions& options) {
  compute_grads();
  double worst = 0.0;
  for (Param* p : params) {
    auto values = p->value.data();
    const std::size_t n = std::min(values.size(), options.max_entries_per_param);
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = values[i];
      const double hi = saved + options.epsilon;
      const double lo = saved - options.epsilon;
      values[i] = hi;
      const long double up = loss();
      values[i] = lo;
      const long double down = loss();
      values[i] = saved;
      if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down))) {
        throw Error("grad_check: non-finite loss while perturbing " + p->name);
      }
      // Divide by the step actually taken after rounding hi and lo.
      const long double step = static_cast<long double>(hi) - static_cast<long double>(lo);
      const double numeric = static_cast<double>((up - down) / step);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace lamner::nn
