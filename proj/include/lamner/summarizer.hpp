#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lamner/char_lm.hpp"
#include "lamner/checkpoint.hpp"
#include "lamner/corpus.hpp"
#include "lamner/embedding_table.hpp"
#include "lamner/nn.hpp"

namespace lamner {

/// Which table initializes the code embedding matrix.
enum class SummarizerMode {
  kLamner,  // semantic || syntactic, fine-tuned
  kLam,     // semantic only
  kNer,     // syntactic only
  kStatic,  // semantic || syntactic, frozen
};

std::string_view mode_name(SummarizerMode mode);
SummarizerMode parse_mode(std::string_view name);

/// Picks (and for the concatenating modes, builds) the code table for `mode`.
/// Throws Error when a required table is missing.
EmbeddingTable code_table_for_mode(SummarizerMode mode, const EmbeddingTable* semantic,
                                   const EmbeddingTable* syntactic);

struct SummarizerConfig {
  SummarizerMode mode = SummarizerMode::kLamner;
  std::size_t code_dim = 0;  // expected code embedding width; 0 accepts the table's
  std::size_t enc_hidden = 256;  // per direction
  std::size_t dec_hidden = 512;
  std::size_t comment_dim = 256;
  std::size_t attention_dim = 256;
  double dropout = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  double clip_norm = 5.0;
  int patience = 7;
  double decay_factor = 0.1;
  double lr_floor = 1e-7;
  std::uint64_t seed = 1;
  std::size_t max_len = 30;
  std::size_t beam_width = 1;  // 1 = greedy
  bool verbose = false;
};

struct EncoderOutput {
  Matrix states;  // n x 2*enc_hidden, forward || backward per position
  Vec h_last;     // forward final || backward final (position 0)
  Vec h_final;    // tanh(bridge(h_last)), the decoder's initial state
};

struct Attention {
  Vec context;
  Vec weights;
};

struct DecodeStep {
  Vec logits;
  Vec state;
  Vec weights;
};

struct Generation {
  std::vector<std::size_t> ids;
  std::vector<std::string> tokens;
  Matrix attention;  // one row per emitted token, one column per code token
};

class SummarizerModel {
 public:
  /// Code embedding rows come from `code_table` by token; vocabulary tokens
  /// missing from it get seeded uniform(-0.05, 0.05) rows. Throws
  /// DimensionError when config.code_dim is set and differs from the table.
  SummarizerModel(Vocabulary code_vocab, Vocabulary comment_vocab, const EmbeddingTable& code_table,
                  const SummarizerConfig& config);

  const Vocabulary& code_vocab() const { return code_vocab_; }
  const Vocabulary& comment_vocab() const { return comment_vocab_; }
  const SummarizerConfig& config() const { return config_; }
  std::size_t code_dim() const { return code_embed_.dim(); }
  const Matrix& code_embedding() const { return code_embed_.table.value; }

  nn::ParamList params();
  nn::Param& param(const std::string& name);

  EncoderOutput encode(const std::vector<std::size_t>& code_ids) const;
  Attention attend(std::span<const double> state, const Matrix& encoder_states) const;
  DecodeStep decode_step(std::size_t prev_token, std::span<const double> state,
                         const Matrix& encoder_states) const;

  /// Greedy (or beam, when beam_width > 1) decoding from SOS; EOS is not
  /// emitted. max_len defaults to the configured cap.
  Generation generate(const std::vector<std::string>& code_tokens,
                      std::optional<std::size_t> max_len = std::nullopt,
                      std::optional<std::size_t> beam_width = std::nullopt) const;

  /// Teacher-forced mean token cross-entropy (comment followed by EOS), no dropout.
  double loss(const ParallelPair& pair) const;
  /// Accumulates scale * d(loss)/d(params); returns the unscaled loss.
  double accumulate_gradients(const ParallelPair& pair, Rng* dropout_rng, double scale);

  Checkpoint to_checkpoint() const;
  static SummarizerModel from_checkpoint(const Checkpoint& ck);

 private:
  SummarizerModel(Vocabulary code_vocab, Vocabulary comment_vocab, std::size_t code_dim,
                  const SummarizerConfig& config);
  Generation beam_search(const std::vector<std::size_t>& code_ids, std::size_t max_len,
                         std::size_t width) const;
  Matrix attention_keys(const Matrix& encoder_states) const;

  Vocabulary code_vocab_;
  Vocabulary comment_vocab_;
  SummarizerConfig config_;
  nn::Embedding code_embed_;
  nn::GruCell enc_forward_;
  nn::GruCell enc_backward_;
  nn::Linear bridge_;
  nn::Linear attn_query_;
  nn::Param attn_key_;  // attention_dim x 2*enc_hidden
  nn::Param attn_v_;    // 1 x attention_dim
  nn::Embedding comment_embed_;
  nn::GruCell decoder_;
  nn::Linear readout_;
};

struct SummarizerHooks {
  // Called after every epoch with the 1-based epoch number.
  std::function<void(const SummarizerModel&, int)> on_epoch;
};

/// Builds the model from the vocabularies and code table, then trains with
/// teacher forcing, SGD and plateau decay.
SummarizerModel train_summarizer(const std::vector<ParallelPair>& train, const Vocabulary& code_vocab,
                                 const Vocabulary& comment_vocab, const EmbeddingTable& code_table,
                                 const SummarizerConfig& config, TrainHistory* history = nullptr,
                                 const std::vector<ParallelPair>* valid = nullptr,
                                 const SummarizerHooks& hooks = {});

/// Continues training an existing model.
void train_summarizer(SummarizerModel& model, const std::vector<ParallelPair>& train,
                      const SummarizerConfig& config, TrainHistory* history = nullptr,
                      const std::vector<ParallelPair>* valid = nullptr, const SummarizerHooks& hooks = {});

/// "rows cols" header, row-major weights, then TAB-separated row labels and
/// column labels. An empty generation writes the header only.
std::string format_attention(const Matrix& attention, const std::vector<std::string>& code_tokens,
                             const std::vector<std::string>& comment_tokens);
void export_attention(const Matrix& attention, const std::vector<std::string>& code_tokens,
                      const std::vector<std::string>& comment_tokens, const std::filesystem::path& path);

}  // namespace lamner
