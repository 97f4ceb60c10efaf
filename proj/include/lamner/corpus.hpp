#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "lamner/lexer.hpp"

namespace lamner {

inline constexpr std::size_t kDefaultMaxCodeLen = 300;
inline constexpr std::size_t kDefaultMaxCommentLen = 30;

struct ParallelPair {
  std::string id;
  std::vector<std::string> code_tokens;
  std::vector<std::string> comment_tokens;

  friend bool operator==(const ParallelPair&, const ParallelPair&) = default;
};

enum class DatasetFormat { kJsonl, kTsv };

std::optional<DatasetFormat> parse_dataset_format(std::string_view name);
DatasetFormat guess_dataset_format(const std::filesystem::path& path);

/// One raw record: untouched code and comment strings plus the 1-based line.
struct RawRecord {
  std::string id;
  std::string code;
  std::string comment;
  std::size_t line = 0;
};

/// Reads records in file order. Throws DatasetError naming the line for a
/// missing/empty field, a wrong column count or invalid UTF-8.
std::vector<RawRecord> load_raw_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Java-lexes the code (whitespace split if it does not lex) and tokenizes
/// the comment; no literal replacement or truncation yet.
ParallelPair to_pair(const RawRecord& record);

std::vector<ParallelPair> load_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Lower-cases, splits off terminal punctuation and splits on whitespace.
std::vector<std::string> tokenize_comment(std::string_view comment);

/// Code tokens of a method: Java lexer output, or a whitespace split when the
/// text does not lex.
std::vector<std::string> code_tokens_from_source(std::string_view code);

struct PreprocessOptions {
  std::size_t max_code_len = kDefaultMaxCodeLen;
  std::size_t max_comment_len = kDefaultMaxCommentLen;
};

/// Literals to NUM/STR, comment lower-cased, prefix truncation. Idempotent.
ParallelPair preprocess(ParallelPair pair, const PreprocessOptions& options = {});

/// Token <-> index map with the specials at fixed indices.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kSos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kSpecialCount = 4;

  Vocabulary();
  /// Specials followed by `tokens` (which must not repeat or contain them).
  explicit Vocabulary(const std::vector<std::string>& tokens);

  static const std::vector<std::string>& special_tokens();

  std::size_t size() const { return tokens_.size(); }
  std::size_t index(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Side { kCode, kComment };

/// Tokens with frequency >= min_count, ordered by frequency desc then
/// lexicographically. Throws Error on an empty corpus.
Vocabulary build_vocab(const std::vector<ParallelPair>& pairs, Side side, std::size_t min_count = 2);

struct SplitSpec {
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 13;
};

struct Splits {
  std::vector<ParallelPair> train, valid, test;
};

/// Seeded shuffle then cut. valid and test sizes are round(n * fraction);
/// train takes the remainder.
Splits split(const std::vector<ParallelPair>& pairs, const SplitSpec& spec);

/// Sizes split() produces for n records.
std::tuple<std::size_t, std::size_t, std::size_t> split_sizes(std::size_t n, const SplitSpec& spec);

/// Code line fed to the character language model: tokens joined by spaces.
std::string code_line(const std::vector<std::string>& tokens);

/// Byte spans of each token within code_line(tokens).
std::vector<std::pair<std::size_t, std::size_t>> code_line_spans(const std::vector<std::string>& tokens);

void write_pairs_jsonl(const std::filesystem::path& path, const std::vector<ParallelPair>& pairs);

}  // namespace lamner
