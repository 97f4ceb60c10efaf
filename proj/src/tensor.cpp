#include "lamner/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace lamner {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void matvec_acc(const Matrix& w, std::span<const double> x, std::span<double> y,
                std::size_t row_begin) {
  assert(x.size() == w.cols() && row_begin + y.size() <= w.rows());
  const std::size_t cols = w.cols();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double* row = w.data().data() + (row_begin + i) * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

void matvec_t_acc(const Matrix& w, std::span<const double> dy, std::span<double> dx,
                  std::size_t row_begin) {
  assert(dx.size() == w.cols() && row_begin + dy.size() <= w.rows());
  const std::size_t cols = w.cols();
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    const double* row = w.data().data() + (row_begin + i) * cols;
    for (std::size_t j = 0; j < cols; ++j) dx[j] += g * row[j];
  }
}

void outer_acc(std::span<const double> dy, std::span<const double> x, Matrix& dw,
               std::size_t row_begin) {
  assert(x.size() == dw.cols() && row_begin + dy.size() <= dw.rows());
  const std::size_t cols = dw.cols();
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    double* row = dw.data().data() + (row_begin + i) * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += g * x[j];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace lamner
