#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lamner {

using Tokens = std::vector<std::string>;

struct EvalPair {
  Tokens candidate;
  std::vector<Tokens> references;  // nonempty
};

struct MetricOptions {
  double bleu_epsilon = 1e-9;  // sentence-level smoothing only
  double meteor_alpha = 0.9;
  double meteor_beta = 3.0;
  double meteor_gamma = 0.5;
  std::size_t meteor_node_limit = 200000;  // alignment search budget per sentence
  double cider_sigma = 6.0;
  bool cider_scaled = true;  // multiply by 10
};

/// Corpus-level BLEU (percentage), geometric mean of orders 1..max_order with
/// uniform weights, unsmoothed, with the standard brevity penalty. Returns 0
/// when any order has no match or the candidates are empty.
double bleu(const std::vector<EvalPair>& pairs, int max_order);

/// Sentence-level BLEU (percentage) with zero-match orders smoothed to epsilon.
double sentence_bleu(const EvalPair& pair, int max_order, const MetricOptions& options = {});

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// ROUGE-L F for one pair (fraction in [0, 1]); best over references.
double rouge_l_sentence(const EvalPair& pair);
/// Mean per-pair ROUGE-L F (percentage).
double rouge_l(const std::vector<EvalPair>& pairs);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Exact-match alignment with the most matches, then the fewest chunks.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference,
                             std::size_t node_limit = 200000);
/// METEOR for one pair (fraction in [0, 1]); best over references.
double meteor_sentence(const EvalPair& pair, const MetricOptions& options = {});
/// Mean per-pair METEOR (percentage).
double meteor(const std::vector<EvalPair>& pairs, const MetricOptions& options = {});

/// Per-pair CIDEr-D scores (document frequencies over the references of the
/// whole corpus). Each score is at most 10 when scaled.
std::vector<double> cider_scores(const std::vector<EvalPair>& pairs, const MetricOptions& options = {});
double cider(const std::vector<EvalPair>& pairs, const MetricOptions& options = {});

struct SampleScores {
  double bleu4 = 0.0;  // smoothed sentence BLEU-4, percentage
  double rouge_l = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
};

struct MetricReport {
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  std::vector<SampleScores> per_sample;

  /// Exactly the seven headline keys, fixed 6-decimal formatting.
  std::string to_json() const;
  std::string to_table() const;
};

MetricReport report(const std::vector<EvalPair>& pairs, const MetricOptions& options = {});

}  // namespace lamner
