#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lamner/char_lm.hpp"
#include "lamner/checkpoint.hpp"
#include "lamner/corpus.hpp"
#include "lamner/crf.hpp"
#include "lamner/embedding_table.hpp"
#include "lamner/lexer.hpp"
#include "lamner/nn.hpp"

namespace lamner {

struct LabeledSequence {
  std::vector<std::string> tokens;
  std::vector<EntityLabel> labels;
};

/// Reads token TAB label lines; blank lines separate sequences. Throws
/// DatasetError (with the line number) on malformed lines or unknown labels.
std::vector<LabeledSequence> read_conll(const std::filesystem::path& path);
std::vector<LabeledSequence> parse_conll(const std::string& text);
std::string to_conll(const std::vector<LabeledSequence>& sequences);

/// Labeled sequence of a lexed and labeled method (literals normalized).
LabeledSequence labeled_sequence(const TokenizedMethod& method);

struct NerConfig {
  std::size_t proj = 256;
  std::size_t hidden = 128;
  double dropout = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  double clip_norm = 5.0;
  int patience = 7;
  double decay_factor = 0.1;
  double lr_floor = 1e-7;
  std::uint64_t seed = 1;
  bool fine_tune_embeddings = true;
  bool verbose = false;
};

/// Token embeddings (initialized from a semantic table) -> linear projection
/// -> forward and backward LSTMs -> dropout -> emission scores -> CRF.
class NerModel {
 public:
  /// The token inventory is the table's rows; table tokens that are special
  /// symbols keep their rows, missing specials get seeded uniform rows.
  NerModel(const EmbeddingTable& semantic, const NerConfig& config);

  const Vocabulary& vocab() const { return vocab_; }
  const NerConfig& config() const { return config_; }
  std::size_t output_dim() const { return 2 * config_.hidden; }

  nn::ParamList params();
  const Crf& crf() const { return crf_; }

  /// T x |labels| emission scores (no dropout).
  Matrix emissions(const std::vector<std::string>& tokens) const;
  /// T x 2*hidden concatenated BiLSTM outputs (no dropout).
  Matrix contextual_states(const std::vector<std::string>& tokens) const;
  std::vector<EntityLabel> predict(const std::vector<std::string>& tokens) const;

  /// CRF negative log-likelihood without dropout.
  double loss(const LabeledSequence& sequence) const;
  /// Accumulates scale * d(nll)/d(params); returns the unscaled nll.
  double accumulate_gradients(const LabeledSequence& sequence, Rng* dropout_rng, double scale);

  Checkpoint to_checkpoint() const;
  static NerModel from_checkpoint(const Checkpoint& ck);

 private:
  struct Pass;
  NerModel(Vocabulary vocab, const NerConfig& config);
  void run(const std::vector<std::size_t>& ids, Rng* dropout_rng, Pass& pass) const;

  Vocabulary vocab_;
  NerConfig config_;
  nn::Embedding embed_;
  nn::Linear proj_;
  nn::LstmCell forward_;
  nn::LstmCell backward_;
  nn::Linear emit_;
  Crf crf_;
};

NerModel train_ner(const std::vector<LabeledSequence>& train, const EmbeddingTable& semantic,
                   const NerConfig& config, TrainHistory* history = nullptr,
                   const std::vector<LabeledSequence>* valid = nullptr);

struct LabelScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  std::size_t correct = 0;
};

struct NerEvaluation {
  std::array<LabelScores, kEntityLabelCount> per_label{};
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  std::size_t tokens = 0;

  std::string to_json() const;
  std::string to_table() const;
};

/// Token-level scores; a zero denominator yields 0.
NerEvaluation score_labels(const std::vector<std::vector<EntityLabel>>& gold,
                           const std::vector<std::vector<EntityLabel>>& predicted);
NerEvaluation evaluate_ner(const NerModel& model, const std::vector<LabeledSequence>& gold);

/// Per-type mean BiLSTM output over the occurrences of each vocabulary token.
EmbeddingTable build_syntactic_table(const NerModel& model,
                                     const std::vector<std::vector<std::string>>& corpus,
                                     const Vocabulary& vocab, std::uint64_t seed,
                                     std::size_t occurrence_cap = 1000,
                                     std::vector<std::string>* fallback_tokens = nullptr);

}  // namespace lamner
