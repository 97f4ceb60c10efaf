#include "lamner/crf.hpp"

#include <cmath>

#include "lamner/error.hpp"

namespace lamner {

Crf::Crf(std::size_t num_labels, const std::string& name)
    : transitions(name, num_labels + 2, num_labels + 2), num_labels_(num_labels) {}

void Crf::check(const Matrix& emissions) const {
  if (emissions.rows() == 0) throw Error("crf: empty sequence");
  if (emissions.cols() != num_labels_) {
    throw DimensionError("crf: emissions have " + std::to_string(emissions.cols()) +
                         " columns, expected " + std::to_string(num_labels_));
  }
}

double Crf::path_score(const Matrix& emissions, std::span<const std::size_t> labels) const {
  check(emissions);
  if (labels.size() != emissions.rows()) throw DimensionError("crf: label/emission length mismatch");
  const Matrix& tr = transitions.value;
  double s = tr(bos(), labels[0]);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] >= num_labels_) throw Error("crf: label index out of range");
    s += emissions(t, labels[t]);
    if (t > 0) s += tr(labels[t - 1], labels[t]);
  }
  return s + tr(labels.back(), eos());
}

double Crf::log_partition(const Matrix& emissions) const {
  check(emissions);
  const std::size_t n = emissions.rows(), k = num_labels_;
  const Matrix& tr = transitions.value;
  Vec alpha(k), next(k), buf(k);
  for (std::size_t y = 0; y < k; ++y) alpha[y] = tr(bos(), y) + emissions(0, y);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < k; ++y) {
      for (std::size_t p = 0; p < k; ++p) buf[p] = alpha[p] + tr(p, y);
      next[y] = emissions(t, y) + nn::log_sum_exp(buf);
    }
    alpha.swap(next);
  }
  for (std::size_t y = 0; y < k; ++y) buf[y] = alpha[y] + tr(y, eos());
  return nn::log_sum_exp(buf);
}

double Crf::neg_log_likelihood(const Matrix& emissions, std::span<const std::size_t> gold,
                               Matrix* d_emissions, double scale) {
  check(emissions);
  const std::size_t n = emissions.rows(), k = num_labels_;
  if (gold.size() != n) throw DimensionError("crf: label/emission length mismatch");
  const Matrix& tr = transitions.value;

  Matrix alpha(n, k), beta(n, k);
  Vec buf(k);
  for (std::size_t y = 0; y < k; ++y) alpha(0, y) = tr(bos(), y) + emissions(0, y);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < k; ++y) {
      for (std::size_t p = 0; p < k; ++p) buf[p] = alpha(t - 1, p) + tr(p, y);
      alpha(t, y) = emissions(t, y) + nn::log_sum_exp(buf);
    }
  }
  for (std::size_t y = 0; y < k; ++y) beta(n - 1, y) = tr(y, eos());
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t y = 0; y < k; ++y) {
      for (std::size_t q = 0; q < k; ++q) buf[q] = tr(y, q) + emissions(t + 1, q) + beta(t + 1, q);
      beta(t, y) = nn::log_sum_exp(buf);
    }
  }
  for (std::size_t y = 0; y < k; ++y) buf[y] = alpha(n - 1, y) + beta(n - 1, y);
  const double log_z = nn::log_sum_exp(buf);
  const double loss = log_z - path_score(emissions, gold);

  Matrix& dtr = transitions.grad;
  if (d_emissions) *d_emissions = Matrix(n, k);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t y = 0; y < k; ++y) {
      const double marginal = std::exp(alpha(t, y) + beta(t, y) - log_z);
      if (d_emissions) (*d_emissions)(t, y) = scale * marginal;
      if (t == 0) dtr(bos(), y) += scale * marginal;
      if (t == n - 1) dtr(y, eos()) += scale * marginal;
    }
    if (d_emissions) (*d_emissions)(t, gold[t]) -= scale;
    if (t > 0) {
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t y = 0; y < k; ++y) {
          const double pair =
              std::exp(alpha(t - 1, p) + tr(p, y) + emissions(t, y) + beta(t, y) - log_z);
          dtr(p, y) += scale * pair;
        }
      }
      dtr(gold[t - 1], gold[t]) -= scale;
    }
  }
  dtr(bos(), gold[0]) -= scale;
  dtr(gold[n - 1], eos()) -= scale;
  return loss;
}

std::vector<std::size_t> Crf::viterbi(const Matrix& emissions) const {
  check(emissions);
  const std::size_t n = emissions.rows(), k = num_labels_;
  const Matrix& tr = transitions.value;
  Vec delta(k), next(k);
  std::vector<std::vector<std::size_t>> back(n, std::vector<std::size_t>(k, 0));
  for (std::size_t y = 0; y < k; ++y) delta[y] = tr(bos(), y) + emissions(0, y);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < k; ++y) {
      std::size_t best = 0;
      double best_score = delta[0] + tr(0, y);
      for (std::size_t p = 1; p < k; ++p) {
        const double s = delta[p] + tr(p, y);
        if (s > best_score) {
          best_score = s;
          best = p;
        }
      }
      next[y] = best_score + emissions(t, y);
      back[t][y] = best;
    }
    delta.swap(next);
  }
  std::size_t last = 0;
  double best_score = delta[0] + tr(0, eos());
  for (std::size_t y = 1; y < k; ++y) {
    const double s = delta[y] + tr(y, eos());
    if (s > best_score) {
      best_score = s;
      last = y;
    }
  }
  std::vector<std::size_t> path(n);
  path[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
  return path;
}

}  // namespace lamner
