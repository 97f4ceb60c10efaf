#include "lamner/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "lamner/error.hpp"

namespace lamner {
namespace {

using NgramCounts = std::map<Tokens, std::size_t>;

NgramCounts ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                 tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

void check_pair(const EvalPair& pair) {
  if (pair.references.empty()) throw Error("metrics: pair without references");
}

void check_order(int max_order) {
  if (max_order < 1 || max_order > 4) throw Error("bleu: order must be in 1..4");
}

// Clipped matches and candidate n-gram total for one order.
std::pair<std::size_t, std::size_t> modified_counts(const EvalPair& pair, std::size_t n) {
  const NgramCounts cand = ngrams(pair.candidate, n);
  NgramCounts max_ref;
  for (const auto& ref : pair.references) {
    for (const auto& [gram, count] : ngrams(ref, n)) max_ref[gram] = std::max(max_ref[gram], count);
  }
  std::size_t matches = 0, total = 0;
  for (const auto& [gram, count] : cand) {
    total += count;
    auto it = max_ref.find(gram);
    if (it != max_ref.end()) matches += std::min(count, it->second);
  }
  return {matches, total};
}

// Reference length closest to the candidate length; ties go to the shorter.
std::size_t closest_ref_length(const EvalPair& pair) {
  const std::size_t c = pair.candidate.size();
  std::size_t best = pair.references.front().size();
  for (const auto& ref : pair.references) {
    const auto d = [c](std::size_t r) { return r > c ? r - c : c - r; };
    if (d(ref.size()) < d(best) || (d(ref.size()) == d(best) && ref.size() < best)) best = ref.size();
  }
  return best;
}

double brevity_penalty(std::size_t c, std::size_t r) {
  if (c == 0) return 0.0;
  if (c > r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

}  // namespace

double bleu(const std::vector<EvalPair>& pairs, int max_order) {
  check_order(max_order);
  std::vector<std::size_t> matches(max_order, 0), totals(max_order, 0);
  std::size_t c = 0, r = 0;
  for (const auto& pair : pairs) {
    check_pair(pair);
    c += pair.candidate.size();
    r += closest_ref_length(pair);
    for (int n = 1; n <= max_order; ++n) {
      auto [m, t] = modified_counts(pair, static_cast<std::size_t>(n));
      matches[n - 1] += m;
      totals[n - 1] += t;
    }
  }
  if (c == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < max_order; ++n) {
    if (matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  return 100.0 * brevity_penalty(c, r) * std::exp(log_sum / max_order);
}

double sentence_bleu(const EvalPair& pair, int max_order, const MetricOptions& options) {
  check_order(max_order);
  check_pair(pair);
  const std::size_t c = pair.candidate.size();
  if (c == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_order; ++n) {
    auto [m, t] = modified_counts(pair, static_cast<std::size_t>(n));
    const double numerator = m == 0 ? options.bleu_epsilon : static_cast<double>(m);
    log_sum += std::log(numerator / static_cast<double>(std::max<std::size_t>(t, 1)));
  }
  return 100.0 * brevity_penalty(c, closest_ref_length(pair)) * std::exp(log_sum / max_order);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_sentence(const EvalPair& pair) {
  check_pair(pair);
  double best = 0.0;
  for (const auto& ref : pair.references) {
    const std::size_t lcs = lcs_length(pair.candidate, ref);
    if (lcs == 0) continue;
    const double recall = static_cast<double>(lcs) / static_cast<double>(ref.size());
    const double precision = static_cast<double>(lcs) / static_cast<double>(pair.candidate.size());
    const double beta = precision / recall;
    const double f = (1.0 + beta * beta) * recall * precision / (recall + beta * beta * precision);
    best = std::max(best, f);
  }
  return best;
}

double rouge_l(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& pair : pairs) total += rouge_l_sentence(pair);
  return 100.0 * total / static_cast<double>(pairs.size());
}

namespace {

class AlignmentSearch {
 public:
  AlignmentSearch(const Tokens& candidate, const Tokens& reference, std::size_t node_limit)
      : cand_(candidate), ref_(reference), node_limit_(node_limit), used_(reference.size(), false),
        match_of_(candidate.size(), kNone) {
    for (std::size_t j = 0; j < ref_.size(); ++j) ref_positions_[ref_[j]].push_back(j);
    for (const auto& t : cand_) ++cand_remaining_[t];
    for (const auto& [t, positions] : ref_positions_) {
      auto it = cand_remaining_.find(t);
      if (it != cand_remaining_.end()) target_matches_ += std::min(it->second, positions.size());
      ref_remaining_[t] = positions.size();
    }
  }

  MeteorAlignment run() {
    best_chunks_ = std::numeric_limits<std::size_t>::max();
    search(0, 0, 0);
    return {target_matches_, target_matches_ == 0 ? 0 : best_chunks_};
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  void search(std::size_t i, std::size_t matched, std::size_t chunks) {
    if (chunks >= best_chunks_) return;
    if (nodes_ >= node_limit_ && best_chunks_ != std::numeric_limits<std::size_t>::max()) return;
    ++nodes_;
    if (i == cand_.size()) {
      if (matched == target_matches_) best_chunks_ = chunks;
      return;
    }
    const std::string& tok = cand_[i];
    auto rp = ref_positions_.find(tok);
    const std::size_t prev_match = i > 0 ? match_of_[i - 1] : kNone;
    --cand_remaining_[tok];
    if (rp != ref_positions_.end()) {
      // Try the continuation of the current chunk first, then the rest in order.
      std::vector<std::size_t> order;
      if (prev_match != kNone && prev_match + 1 < ref_.size() && ref_[prev_match + 1] == tok &&
          !used_[prev_match + 1]) {
        order.push_back(prev_match + 1);
      }
      for (std::size_t j : rp->second) {
        if (!used_[j] && (order.empty() || j != order.front())) order.push_back(j);
      }
      for (std::size_t j : order) {
        const bool continues = prev_match != kNone && j == prev_match + 1;
        used_[j] = true;
        match_of_[i] = j;
        --ref_remaining_[tok];
        search(i + 1, matched + 1, chunks + (continues ? 0 : 1));
        ++ref_remaining_[tok];
        match_of_[i] = kNone;
        used_[j] = false;
      }
    }
    // Leaving this token unmatched is allowed only if the remaining
    // candidate occurrences can still use up every free reference slot.
    const std::size_t free_refs = rp == ref_positions_.end() ? 0 : ref_remaining_[tok];
    if (cand_remaining_[tok] >= free_refs) search(i + 1, matched, chunks);
    ++cand_remaining_[tok];
  }

  const Tokens& cand_;
  const Tokens& ref_;
  std::size_t node_limit_;
  std::size_t nodes_ = 0;
  std::vector<bool> used_;
  std::vector<std::size_t> match_of_;
  std::map<std::string, std::vector<std::size_t>> ref_positions_;
  std::map<std::string, std::size_t> cand_remaining_;
  std::map<std::string, std::size_t> ref_remaining_;
  std::size_t target_matches_ = 0;
  std::size_t best_chunks_ = 0;
};

}  // namespace

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference, std::size_t node_limit) {
  return AlignmentSearch(candidate, reference, node_limit).run();
}

double meteor_sentence(const EvalPair& pair, const MetricOptions& options) {
  check_pair(pair);
  double best = 0.0;
  for (const auto& ref : pair.references) {
    const MeteorAlignment a = meteor_align(pair.candidate, ref, options.meteor_node_limit);
    if (a.matches == 0) continue;
    const double m = static_cast<double>(a.matches);
    const double precision = m / static_cast<double>(pair.candidate.size());
    const double recall = m / static_cast<double>(ref.size());
    const double fmean =
        precision * recall / (options.meteor_alpha * precision + (1.0 - options.meteor_alpha) * recall);
    const double frag = static_cast<double>(a.chunks) / m;
    const double penalty = options.meteor_gamma * std::pow(frag, options.meteor_beta);
    best = std::max(best, fmean * (1.0 - penalty));
  }
  return best;
}

double meteor(const std::vector<EvalPair>& pairs, const MetricOptions& options) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& pair : pairs) total += meteor_sentence(pair, options);
  return 100.0 * total / static_cast<double>(pairs.size());
}

namespace {

struct TfIdf {
  std::array<std::map<Tokens, double>, 4> vec;
  std::array<double, 4> norm{};
  std::size_t length = 0;
};

TfIdf tfidf(const Tokens& tokens, const std::map<Tokens, std::size_t>& df, double log_n) {
  TfIdf out;
  out.length = tokens.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    for (const auto& [gram, tf] : ngrams(tokens, n)) {
      auto it = df.find(gram);
      const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
      const double w = static_cast<double>(tf) * (log_n - std::log(std::max(1.0, d)));
      out.vec[n - 1][gram] = w;
      out.norm[n - 1] += w * w;
    }
    out.norm[n - 1] = std::sqrt(out.norm[n - 1]);
  }
  return out;
}

}  // namespace

std::vector<double> cider_scores(const std::vector<EvalPair>& pairs, const MetricOptions& options) {
  std::map<Tokens, std::size_t> df;
  for (const auto& pair : pairs) {
    check_pair(pair);
    std::set<Tokens> seen;
    for (const auto& ref : pair.references) {
      for (std::size_t n = 1; n <= 4; ++n) {
        for (const auto& entry : ngrams(ref, n)) seen.insert(entry.first);
      }
    }
    for (const auto& g : seen) ++df[g];
  }
  const double log_n = std::log(static_cast<double>(std::max<std::size_t>(pairs.size(), 1)));
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const TfIdf hyp = tfidf(pair.candidate, df, log_n);
    double total = 0.0;
    for (const auto& ref_tokens : pair.references) {
      const TfIdf ref = tfidf(ref_tokens, df, log_n);
      const double delta = static_cast<double>(hyp.length) - static_cast<double>(ref.length);
      const double length_penalty = std::exp(-(delta * delta) / (2.0 * options.cider_sigma * options.cider_sigma));
      double mean = 0.0;
      for (std::size_t n = 0; n < 4; ++n) {
        double val = 0.0;
        for (const auto& [gram, w] : hyp.vec[n]) {
          auto it = ref.vec[n].find(gram);
          if (it != ref.vec[n].end()) val += std::min(w, it->second) * it->second;
        }
        if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val /= hyp.norm[n] * ref.norm[n];
        mean += val * length_penalty;
      }
      total += mean / 4.0;
    }
    double score = total / static_cast<double>(pair.references.size());
    if (options.cider_scaled) score *= 10.0;
    scores.push_back(score);
  }
  return scores;
}

double cider(const std::vector<EvalPair>& pairs, const MetricOptions& options) {
  if (pairs.empty()) return 0.0;
  const auto scores = cider_scores(pairs, options);
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(scores.size());
}

MetricReport report(const std::vector<EvalPair>& pairs, const MetricOptions& options) {
  MetricReport r;
  if (pairs.empty()) return r;
  r.bleu1 = bleu(pairs, 1);
  r.bleu2 = bleu(pairs, 2);
  r.bleu3 = bleu(pairs, 3);
  r.bleu4 = bleu(pairs, 4);
  r.rouge_l = rouge_l(pairs);
  r.meteor = meteor(pairs, options);
  const auto ciders = cider_scores(pairs, options);
  double total = 0.0;
  for (double s : ciders) total += s;
  r.cider = total / static_cast<double>(ciders.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    r.per_sample.push_back({sentence_bleu(pairs[i], 4, options), 100.0 * rouge_l_sentence(pairs[i]),
                            100.0 * meteor_sentence(pairs[i], options), ciders[i]});
  }
  return r;
}

std::string MetricReport::to_json() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\n  \"bleu1\": %.6f,\n  \"bleu2\": %.6f,\n  \"bleu3\": %.6f,\n  \"bleu4\": %.6f,\n"
                "  \"rouge_l\": %.6f,\n  \"meteor\": %.6f,\n  \"cider\": %.6f\n}\n",
                bleu1, bleu2, bleu3, bleu4, rouge_l, meteor, cider);
  return buf;
}

std::string MetricReport::to_table() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-8s %-8s %-8s %-8s %-8s %-8s %-8s\n%-8.2f %-8.2f %-8.2f %-8.2f %-8.2f %-8.2f %-8.2f\n",
                "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "METEOR", "CIDEr", bleu1, bleu2, bleu3, bleu4,
                rouge_l, meteor, cider);
  return buf;
}

}  // namespace lamner
