#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lamner {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Vectors that must live in a parameter
/// set (biases) are stored as n x 1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y += W[row_begin : row_begin + y.size()] x
void matvec_acc(const Matrix& w, std::span<const double> x, std::span<double> y,
                std::size_t row_begin = 0);

// dx += W[row_begin : row_begin + dy.size()]^T dy
void matvec_t_acc(const Matrix& w, std::span<const double> dy, std::span<double> dx,
                  std::size_t row_begin = 0);

// dW[row_begin + i][j] += dy[i] * x[j]
void outer_acc(std::span<const double> dy, std::span<const double> x, Matrix& dw,
               std::size_t row_begin = 0);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

double sigmoid(double x);

Vec concat(std::span<const double> a, std::span<const double> b);

}  // namespace lamner
