#include "lamner/embedding_table.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "lamner/checkpoint.hpp"
#include "lamner/error.hpp"
#include "lamner/random.hpp"

namespace lamner {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void EmbeddingTable::add(const std::string& token, std::span<const double> row) {
  if (row.size() != dim_) {
    throw DimensionError("embedding row for '" + token + "' has " + std::to_string(row.size()) +
                         " values, table dimension is " + std::to_string(dim_));
  }
  if (!index_.emplace(token, tokens_.size()).second) {
    throw Error("duplicate embedding token '" + token + "'");
  }
  tokens_.push_back(token);
  values_.insert(values_.end(), row.begin(), row.end());
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::row(const std::string& token) const {
  auto i = find(token);
  if (!i) throw Error("token '" + token + "' not in embedding table");
  return row(*i);
}

std::string EmbeddingTable::to_text() const {
  std::string out = std::to_string(size()) + " " + std::to_string(dim_) + "\n";
  for (std::size_t i = 0; i < size(); ++i) {
    out += tokens_[i];
    out += '\t';
    auto r = row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (k) out += ' ';
      out += format_double(r[k]);
    }
    out += '\n';
  }
  return out;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_text());
}

EmbeddingTable EmbeddingTable::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("embedding table: missing header");
  std::istringstream header(line);
  std::size_t count = 0, dim = 0;
  if (!(header >> count >> dim)) throw Error("embedding table: malformed header '" + line + "'");
  EmbeddingTable table(dim);
  std::vector<double> row(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t sep = line.find('\t');
    if (sep == std::string::npos) sep = line.find(' ');
    if (sep == std::string::npos || sep == 0) {
      throw Error("embedding table line " + std::to_string(line_no) + ": missing token separator");
    }
    const std::string token = line.substr(0, sep);
    const char* p = line.data() + sep + 1;
    const char* end = line.data() + line.size();
    for (std::size_t k = 0; k < dim; ++k) {
      while (p < end && *p == ' ') ++p;
      auto res = std::from_chars(p, end, row[k]);
      if (res.ec != std::errc()) {
        throw Error("embedding table line " + std::to_string(line_no) + ": expected " +
                    std::to_string(dim) + " values");
      }
      p = res.ptr;
    }
    while (p < end && *p == ' ') ++p;
    if (p != end) throw Error("embedding table line " + std::to_string(line_no) + ": too many values");
    table.add(token, row);
  }
  if (table.size() != count) {
    throw Error("embedding table: header declares " + std::to_string(count) + " rows, found " +
                std::to_string(table.size()));
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  return from_text(read_file(path));
}

EmbeddingTable concat_tables(const EmbeddingTable& left, const EmbeddingTable& right) {
  std::set<std::string> missing;
  for (const auto& t : left.tokens()) {
    if (!right.contains(t)) missing.insert(t);
  }
  for (const auto& t : right.tokens()) {
    if (!left.contains(t)) missing.insert(t);
  }
  if (!missing.empty()) {
    std::string msg = "vocabulary mismatch between tables; tokens in only one table:";
    for (const auto& t : missing) msg += " " + t;
    throw Error(msg);
  }
  EmbeddingTable out(left.dim() + right.dim());
  std::vector<double> row;
  for (std::size_t i = 0; i < left.size(); ++i) {
    const auto& tok = left.tokens()[i];
    auto a = left.row(i);
    auto b = right.row(tok);
    row.assign(a.begin(), a.end());
    row.insert(row.end(), b.begin(), b.end());
    out.add(tok, row);
  }
  return out;
}

MeanTableBuilder::MeanTableBuilder(const Vocabulary& vocab, std::size_t dim, std::size_t occurrence_cap)
    : vocab_(vocab), dim_(dim), cap_(occurrence_cap), sums_(vocab.size() * dim, 0.0),
      counts_(vocab.size(), 0) {}

bool MeanTableBuilder::wants(const std::string& token) const {
  const std::size_t i = vocab_.index(token);
  if (i < Vocabulary::kSpecialCount) return false;
  return counts_[i] < cap_;
}

void MeanTableBuilder::add(const std::string& token, std::span<const double> vec) {
  if (!wants(token)) return;
  if (vec.size() != dim_) throw DimensionError("occurrence vector has wrong dimension");
  const std::size_t i = vocab_.index(token);
  for (std::size_t k = 0; k < dim_; ++k) sums_[i * dim_ + k] += vec[k];
  ++counts_[i];
}

EmbeddingTable MeanTableBuilder::finish(std::uint64_t seed, std::vector<std::string>* fallback_tokens) const {
  EmbeddingTable table(dim_);
  Rng rng(seed);
  std::vector<double> row(dim_);
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (counts_[i] == 0) {
      for (double& v : row) v = rng.uniform(-0.05, 0.05);
      if (fallback_tokens && i >= Vocabulary::kSpecialCount) fallback_tokens->push_back(vocab_.token(i));
    } else {
      for (std::size_t k = 0; k < dim_; ++k) row[k] = sums_[i * dim_ + k] / static_cast<double>(counts_[i]);
    }
    table.add(vocab_.token(i), row);
  }
  return table;
}

}  // namespace lamner
