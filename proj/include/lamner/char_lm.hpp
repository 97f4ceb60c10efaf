#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lamner/checkpoint.hpp"
#include "lamner/corpus.hpp"
#include "lamner/embedding_table.hpp"
#include "lamner/nn.hpp"

namespace lamner {

/// Byte-level character inventory: index 0 is the unknown character, index 1
/// is newline, the rest are the observed bytes in ascending order.
class CharVocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;
  static constexpr std::size_t kNewline = 1;

  CharVocabulary();
  static CharVocabulary build(const std::vector<std::string>& lines);
  static CharVocabulary from_bytes(const std::vector<unsigned char>& observed);

  std::size_t size() const { return chars_.size(); }
  std::size_t index(char c) const { return lookup_[static_cast<unsigned char>(c)]; }
  char character(std::size_t i) const { return static_cast<char>(chars_.at(i)); }
  // Observed bytes (excluding the unknown slot and newline).
  std::vector<unsigned char> observed() const;

 private:
  std::vector<unsigned char> chars_;
  std::vector<std::size_t> lookup_;
};

/// Where the backward half of a token embedding is read.
enum class BackwardAnchor {
  kAtFirstChar,      // state right after consuming the token's first character
  kBeforeFirstChar,  // state after consuming the character left of the token
};

struct CharLmConfig {
  std::size_t char_dim = 32;
  std::size_t hidden = 128;
  double dropout = 0.1;
  std::size_t bptt = 128;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;  // lines per update
  double learning_rate = 0.1;
  double clip_norm = 5.0;
  int patience = 7;
  double decay_factor = 0.1;
  double lr_floor = 1e-7;
  std::uint64_t seed = 1;
  BackwardAnchor anchor = BackwardAnchor::kAtFirstChar;
  bool verbose = false;
};

/// Hidden states over one line. forward[t] is the forward LSTM state after
/// consuming char t (left to right); backward[t] the backward LSTM state
/// after consuming char t (right to left).
struct LineStates {
  Matrix forward;
  Matrix backward;
};

/// Pair of independent character language models (left-to-right and
/// right-to-left) sharing only the character embedding table.
class CharLm {
 public:
  CharLm(CharVocabulary vocab, const CharLmConfig& config);

  const CharVocabulary& vocab() const { return vocab_; }
  const CharLmConfig& config() const { return config_; }
  std::size_t hidden() const { return config_.hidden; }
  std::size_t embedding_dim() const { return 2 * config_.hidden; }

  nn::ParamList params();

  LineStates run(std::string_view line) const;

  /// Mean next-character cross-entropy (nats/char) over both directions,
  /// without dropout. Each line is followed by a newline target.
  double loss(const std::vector<std::string>& lines) const;

  /// Accumulates gradients of the mean per-char loss over `lines` (both
  /// directions) into the parameters; returns the summed loss and the number
  /// of predicted characters per direction.
  std::pair<double, std::size_t> accumulate_gradients(const std::vector<const std::string*>& lines,
                                                      Rng* dropout_rng, double scale);

  /// Forward-model next-character distribution after consuming `prefix`.
  Vec next_char_probs(std::string_view prefix) const;

  /// Greedy decoding from `prefix` until a newline or max_len characters.
  std::string generate(std::string_view prefix, std::size_t max_len) const;

  /// Concatenation forward-state-at-last-char || backward-state at the
  /// configured anchor. Throws Error for an empty or out-of-range span.
  Vec token_embedding(const LineStates& states, std::size_t start, std::size_t end) const;
  Vec token_embedding(std::string_view text, std::size_t start, std::size_t end) const;

  Checkpoint to_checkpoint() const;
  static CharLm from_checkpoint(const Checkpoint& ck);

 private:
  struct Direction {
    nn::LstmCell cell;
    nn::Linear out;
  };

  double direction_pass(Direction& dir, const std::vector<std::size_t>& inputs,
                        const std::vector<std::size_t>& targets, Rng* dropout_rng, double scale);
  Matrix direction_states(const Direction& dir, const std::vector<std::size_t>& inputs) const;
  double direction_loss(const Direction& dir, const std::vector<std::size_t>& inputs,
                        const std::vector<std::size_t>& targets) const;

  CharVocabulary vocab_;
  CharLmConfig config_;
  nn::Embedding embed_;
  Direction forward_;
  Direction backward_;
};

struct TrainHistory {
  std::vector<double> epoch_losses;
  std::vector<double> valid_losses;
  nn::OptimizerState final_state;
};

/// Trains both directions jointly with SGD and plateau decay. Throws Error on
/// an empty corpus.
CharLm train_char_lm(const std::vector<std::string>& lines, const CharLmConfig& config,
                     TrainHistory* history = nullptr,
                     const std::vector<std::string>* valid_lines = nullptr);

/// Per-type semantic table: mean token embedding over the occurrences of each
/// vocabulary token in `corpus` (tokens of each method, laid out with
/// code_line()), capped at `occurrence_cap` occurrences per token.
EmbeddingTable build_semantic_table(const CharLm& model,
                                    const std::vector<std::vector<std::string>>& corpus,
                                    const Vocabulary& vocab, std::uint64_t seed,
                                    std::size_t occurrence_cap = 1000,
                                    std::vector<std::string>* fallback_tokens = nullptr);

}  // namespace lamner
