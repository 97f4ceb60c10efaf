#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lamner/nn.hpp"

namespace lamner {

/// Linear-chain CRF over `num_labels` tags with two synthetic states: BOS
/// (index num_labels) and EOS (index num_labels + 1). transitions(from, to)
/// scores moving from one state to the next; emissions are T x num_labels.
class Crf {
 public:
  Crf() = default;
  explicit Crf(std::size_t num_labels, const std::string& name = "crf.transitions");

  std::size_t num_labels() const { return num_labels_; }
  std::size_t bos() const { return num_labels_; }
  std::size_t eos() const { return num_labels_ + 1; }

  double path_score(const Matrix& emissions, std::span<const std::size_t> labels) const;

  /// log of the sum of exp(path_score) over all label paths (forward algorithm).
  double log_partition(const Matrix& emissions) const;

  /// log Z - score(gold). Adds scale * d(loss)/d(transitions) into the
  /// transition gradient and, if given, writes scale * d(loss)/d(emissions).
  double neg_log_likelihood(const Matrix& emissions, std::span<const std::size_t> gold,
                            Matrix* d_emissions = nullptr, double scale = 1.0);

  /// Highest-scoring path; ties go to the lowest label index at every step.
  std::vector<std::size_t> viterbi(const Matrix& emissions) const;

  nn::Param transitions;

 private:
  void check(const Matrix& emissions) const;
  std::size_t num_labels_ = 0;
};

}  // namespace lamner
