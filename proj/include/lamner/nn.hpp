#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lamner/random.hpp"
#include "lamner/tensor.hpp"

namespace lamner::nn {

/// A named trainable tensor with its gradient accumulator.
struct Param {
  Param() = default;
  Param(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), value(rows, cols), grad(rows, cols) {}

  std::string name;
  Matrix value;
  Matrix grad;
  // Frozen parameters keep a gradient buffer but are skipped by the optimizer.
  bool frozen = false;

  void zero_grad() { grad.fill(0.0); }
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
  void init_uniform(std::size_t fan_in, Rng& rng);
};

using ParamList = std::vector<Param*>;

void zero_grads(const ParamList& params);

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out);

  std::size_t in() const { return weight.value.cols(); }
  std::size_t out() const { return weight.value.rows(); }

  void init(Rng& rng);
  Vec forward(std::span<const double> x) const;
  // Accumulates parameter gradients; dx (if non-empty) is accumulated into.
  void backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);
  ParamList params() { return {&weight, &bias}; }

  Param weight;
  Param bias;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, std::size_t count, std::size_t dim);

  std::size_t count() const { return table.value.rows(); }
  std::size_t dim() const { return table.value.cols(); }

  std::span<const double> lookup(std::size_t index) const { return table.value.row(index); }
  void backward(std::size_t index, std::span<const double> dy);
  ParamList params() { return {&table}; }

  Param table;
};

/// LSTM cell with stacked gate blocks in the order input, forget, output,
/// candidate: w is 4h x in, u is 4h x h, b is 4h x 1.
class LstmCell {
 public:
  struct Cache {
    Vec x, h_prev, c_prev;
    Vec i, f, o, g;
    Vec c, tanh_c, h;
  };

  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t input, std::size_t hidden);

  std::size_t input_size() const { return w.value.cols(); }
  std::size_t hidden_size() const { return u.value.cols(); }

  void init(Rng& rng);
  void step(std::span<const double> x, std::span<const double> h_prev,
            std::span<const double> c_prev, Cache& cache) const;
  // dh and dc are the gradients flowing into h and c of this step. dx and
  // dh_prev are accumulated into; dc_prev is overwritten.
  void backward(const Cache& cache, std::span<const double> dh, std::span<const double> dc,
                std::span<double> dx, std::span<double> dh_prev, std::span<double> dc_prev);
  ParamList params() { return {&w, &u, &b}; }

  Param w, u, b;
};

/// GRU cell with stacked gate blocks in the order update, reset, candidate.
/// h = (1 - z) * h_prev + z * tanh(W_n x + U_n (r * h_prev) + b_n)
class GruCell {
 public:
  struct Cache {
    Vec x, h_prev;
    Vec z, r, n, rh, h;
  };

  GruCell() = default;
  GruCell(const std::string& name, std::size_t input, std::size_t hidden);

  std::size_t input_size() const { return w.value.cols(); }
  std::size_t hidden_size() const { return u.value.cols(); }

  void init(Rng& rng);
  void step(std::span<const double> x, std::span<const double> h_prev, Cache& cache) const;
  void backward(const Cache& cache, std::span<const double> dh, std::span<double> dx,
                std::span<double> dh_prev);
  ParamList params() { return {&w, &u, &b}; }

  Param w, u, b;
};

Vec softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> values);

struct XentResult {
  double loss = 0.0;
  Vec grad;  // softmax - one_hot(target)
};
XentResult softmax_xent(std::span<const double> logits, std::size_t target);

/// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise
/// 1 / (1 - rate). Rate 0 yields all ones.
Vec dropout_mask(std::size_t n, double rate, Rng& rng);
void apply_mask(std::span<double> x, std::span<const double> mask);

struct SgdOptions {
  double learning_rate = 0.1;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

/// p <- p - lr * g over non-frozen parameters, with global-norm clipping.
/// Throws Error naming the first parameter holding a non-finite gradient.
/// Returns the gradient norm before clipping.
double sgd_step(const ParamList& params, const SgdOptions& options);

double grad_norm(const ParamList& params);

struct OptimizerState {
  double learning_rate = 0.1;
  int epochs_since_improvement = 0;
  double best_valid_loss = 1e300;
  double decay_factor = 0.1;
  int patience = 7;
  double floor = 1e-7;
  int epoch = 0;
  int max_epochs = 100;
  bool halted = false;
};

/// Records one epoch's validation loss. After `patience` consecutive
/// non-improving epochs the rate is multiplied by `decay_factor` (never below
/// `floor`) and the counter resets. Halts once the rate has reached the floor
/// or `max_epochs` epochs have been recorded.
OptimizerState plateau_decay(OptimizerState state, double valid_loss);

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t max_entries_per_param = 10000;
};

/// Compares analytic gradients to central finite differences.
/// `loss` evaluates the objective at the current parameter values; it may
/// return extended precision so the difference quotient is not dominated by
/// double rounding. `compute_grads` must zero and fill every Param::grad in
/// `params`. Returns the maximum relative error |a - n| / max(|a|, |n|, 1e-8).
double grad_check(const std::function<long double()>& loss, const std::function<void()>& compute_grads,
                  const ParamList& params, const GradCheckOptions& options = {});

}  // namespace lamner::nn
