#include "lamner/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lamner/error.hpp"
#include "lamner/random.hpp"

namespace lamner {

namespace {

using nlohmann::json;

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

constexpr std::string_view kTerminalPunctuation = ".,;:!?";

}  // namespace

std::optional<DatasetFormat> parse_dataset_format(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::kJsonl;
  if (name == "tsv") return DatasetFormat::kTsv;
  return std::nullopt;
}

DatasetFormat guess_dataset_format(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? DatasetFormat::kTsv : DatasetFormat::kJsonl;
}

std::vector<RawRecord> load_raw_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path.string(), 0);
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    if (!valid_utf8(line)) throw DatasetError("invalid UTF-8", line_no);
    RawRecord rec;
    rec.line = line_no;
    if (format == DatasetFormat::kJsonl) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw DatasetError(std::string("malformed JSON: ") + e.what(), line_no);
      }
      if (!j.is_object()) throw DatasetError("record is not a JSON object", line_no);
      for (const char* field : {"code", "comment"}) {
        if (!j.contains(field) || !j[field].is_string()) {
          throw DatasetError(std::string("missing field '") + field + "'", line_no);
        }
      }
      rec.code = j["code"].get<std::string>();
      rec.comment = j["comment"].get<std::string>();
      if (j.contains("id") && !j["id"].is_null()) {
        rec.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      }
    } else {
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos) throw DatasetError("expected 2 tab-separated columns, found 1", line_no);
      if (line.find('\t', tab + 1) != std::string::npos) {
        throw DatasetError("expected 2 tab-separated columns, found more", line_no);
      }
      rec.code = line.substr(0, tab);
      rec.comment = line.substr(tab + 1);
    }
    if (blank(rec.code)) throw DatasetError("empty 'code' field", line_no);
    if (blank(rec.comment)) throw DatasetError("empty 'comment' field", line_no);
    if (rec.id.empty()) rec.id = std::to_string(records.size());
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> code_tokens_from_source(std::string_view code) {
  try {
    TokenizedMethod m = tokenize(std::string(code));
    std::vector<std::string> out;
    out.reserve(m.tokens.size());
    for (auto& t : m.tokens) out.push_back(std::move(t.text));
    return out;
  } catch (const LexError&) {
    return split_ws(code);
  }
}

std::vector<std::string> tokenize_comment(std::string_view comment) {
  std::vector<std::string> out;
  for (std::string word : split_ws(comment)) {
    word = to_lower(std::move(word));
    std::size_t cut = word.size();
    while (cut > 0 && kTerminalPunctuation.find(word[cut - 1]) != std::string_view::npos) --cut;
    if (cut > 0) out.push_back(word.substr(0, cut));
    for (std::size_t k = cut; k < word.size(); ++k) out.emplace_back(1, word[k]);
  }
  return out;
}

ParallelPair to_pair(const RawRecord& record) {
  ParallelPair p;
  p.id = record.id;
  p.code_tokens = code_tokens_from_source(record.code);
  p.comment_tokens = tokenize_comment(record.comment);
  return p;
}

std::vector<ParallelPair> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::vector<ParallelPair> out;
  for (const RawRecord& r : load_raw_dataset(path, format)) out.push_back(to_pair(r));
  return out;
}

ParallelPair preprocess(ParallelPair pair, const PreprocessOptions& options) {
  if (pair.code_tokens.size() > options.max_code_len) pair.code_tokens.resize(options.max_code_len);
  if (pair.comment_tokens.size() > options.max_comment_len) {
    pair.comment_tokens.resize(options.max_comment_len);
  }
  for (std::string& t : pair.code_tokens) t = normalize_literal(t);
  for (std::string& t : pair.comment_tokens) t = to_lower(std::move(t));
  return pair;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = special_tokens();
  tokens_.insert(tokens_.end(), tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw Error("vocabulary token '" + tokens_[i] + "' appears twice");
    }
  }
}

const std::vector<std::string>& Vocabulary::special_tokens() {
  static const std::vector<std::string> specials = {"<pad>", "<unk>", "<sos>", "<eos>"};
  return specials;
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  for (std::size_t i = kSpecialCount; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write vocabulary " + path.string());
  f << out.str();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocabulary(tokens);
}

Vocabulary build_vocab(const std::vector<ParallelPair>& pairs, Side side, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& p : pairs) {
    const auto& toks = side == Side::kCode ? p.code_tokens : p.comment_tokens;
    for (const auto& t : toks) {
      ++counts[t];
      ++total;
    }
  }
  if (total == 0) throw Error("build_vocab: empty corpus");
  const auto& specials = Vocabulary::special_tokens();
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && std::find(specials.begin(), specials.end(), tok) == specials.end()) {
      kept.emplace_back(tok, n);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary(tokens);
}

std::tuple<std::size_t, std::size_t, std::size_t> split_sizes(std::size_t n, const SplitSpec& spec) {
  const double sum = spec.train_fraction + spec.valid_fraction + spec.test_fraction;
  if (std::abs(sum - 1.0) > 1e-9 || spec.train_fraction < 0 || spec.valid_fraction < 0 ||
      spec.test_fraction < 0) {
    throw Error("split fractions must be non-negative and sum to 1 (got " + std::to_string(sum) + ")");
  }
  const auto valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.valid_fraction));
  const auto test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
  if (valid + test > n) return {0, std::min(valid, n), n - std::min(valid, n)};
  return {n - valid - test, valid, test};
}

Splits split(const std::vector<ParallelPair>& pairs, const SplitSpec& spec) {
  const auto [n_train, n_valid, n_test] = split_sizes(pairs.size(), spec);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  Splits out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const ParallelPair& p = pairs[order[k]];
    if (k < n_train) {
      out.train.push_back(p);
    } else if (k < n_train + n_valid) {
      out.valid.push_back(p);
    } else {
      out.test.push_back(p);
    }
  }
  (void)n_test;
  return out;
}

std::string code_line(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> code_line_spans(const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t pos = 0;
  for (const auto& t : tokens) {
    spans.emplace_back(pos, pos + t.size());
    pos += t.size() + 1;
  }
  return spans;
}

void write_pairs_jsonl(const std::filesystem::path& path, const std::vector<ParallelPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    json j = {{"id", p.id}, {"code", code_line(p.code_tokens)}, {"comment", code_line(p.comment_tokens)}};
    out += j.dump();
    out += '\n';
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << out;
}

}  // namespace lamner
