#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lamner/metrics.hpp"

namespace lamner {

/// One finite-difference scenario: builds a small randomly initialized layer
/// or model from `seed` and returns the worst relative gradient error.
struct GradientCase {
  std::string name;
  double tolerance;
  std::function<double(std::uint64_t seed)> run;
};

/// Layers (linear, softmax, embedding, LSTM, GRU, CRF), one decoder step and
/// the full character LM, tagger and summarizer at micro sizes.
const std::vector<GradientCase>& gradient_cases();

struct CrfOracleReport {
  std::size_t instances = 0;
  double max_log_partition_error = 0.0;
  double max_viterbi_gap = 0.0;  // enumerated best score minus decoded path score
  std::size_t viterbi_failures = 0;
};

/// Random CRFs (length 1..max_len, 1..max_labels labels) compared against
/// exhaustive enumeration of every label path.
CrfOracleReport crf_oracle_check(std::size_t instances, std::uint64_t seed, std::size_t max_len = 6,
                                 std::size_t max_labels = 5);

struct LexerGoldenCase {
  std::string name;
  std::string source;
  std::vector<std::pair<std::string, std::string>> expected;  // token text, label name
};

/// Parses the golden corpus format: "=== name", source lines, "---", then
/// one "token TAB label" line per token. Lines starting with '#' outside a
/// case are comments.
std::vector<LexerGoldenCase> parse_lexer_golden(std::string_view text);
/// One message per disagreement; empty when every case matches exactly.
std::vector<std::string> check_lexer_golden(const std::vector<LexerGoldenCase>& cases);

/// Compares the metric implementation with the frozen oracle values
/// (golden JSON) and the frozen report. Returns one message per mismatch and
/// sets `checks` to the number of comparisons made.
std::vector<std::string> check_metric_golden(std::string_view golden_json, std::string_view golden_report,
                                             const MetricOptions& options, std::size_t* checks = nullptr);

}  // namespace lamner
