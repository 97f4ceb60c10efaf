#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lamner/corpus.hpp"

namespace lamner {

/// Token -> fixed-width vector. Row order is the insertion order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void add(const std::string& token, std::span<const double> row);
  bool contains(const std::string& token) const { return index_.contains(token); }
  std::span<const double> row(const std::string& token) const;
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> find(const std::string& token) const;

  /// Text format: "count dim" header, then one "token TAB v1 v2 ..." line
  /// per token. Values are written in shortest round-trip form.
  void save(const std::filesystem::path& path) const;
  std::string to_text() const;
  /// Accepts TAB or a single space between token and values.
  static EmbeddingTable load(const std::filesystem::path& path);
  static EmbeddingTable from_text(const std::string& text);

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.tokens_ == b.tokens_ && a.values_ == b.values_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Row-wise concatenation, left first. Both tables must hold the same token
/// set; otherwise Error lists the symmetric difference.
EmbeddingTable concat_tables(const EmbeddingTable& left, const EmbeddingTable& right);

std::string format_double(double v);

/// Accumulates per-token occurrence vectors and produces a table over a
/// vocabulary whose rows are the occurrence means. Specials and tokens with no
/// occurrence get uniform(-0.05, 0.05) rows from a seeded generator.
class MeanTableBuilder {
 public:
  MeanTableBuilder(const Vocabulary& vocab, std::size_t dim, std::size_t occurrence_cap = 1000);

  // False for out-of-vocabulary tokens and tokens whose cap is reached.
  bool wants(const std::string& token) const;
  void add(const std::string& token, std::span<const double> vec);

  EmbeddingTable finish(std::uint64_t seed, std::vector<std::string>* fallback_tokens = nullptr) const;

 private:
  const Vocabulary& vocab_;
  std::size_t dim_;
  std::size_t cap_;
  std::vector<double> sums_;
  std::vector<std::size_t> counts_;
};

}  // namespace lamner
