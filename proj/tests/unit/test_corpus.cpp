#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "lamner/corpus.hpp"
#include "lamner/error.hpp"
#include "lamner/synth.hpp"

using namespace lamner;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  auto dir = fs::temp_directory_path() / "lamner_corpus_test";
  fs::create_directories(dir);
  auto path = dir / name;
  std::ofstream(path, std::ios::binary) << contents;
  return path;
}

std::vector<ParallelPair> synth_pairs(std::size_t n, std::uint64_t seed) {
  std::vector<ParallelPair> out;
  for (const auto& m : synthesize_methods(n, seed)) {
    out.push_back(preprocess(to_pair({m.id, m.code, m.comment, 0})));
  }
  return out;
}

}  // namespace

TEST_CASE("one jsonl record maps fields directly") {
  auto path = temp_file("one.jsonl", R"({"code":"int x ;","comment":"sets x"})" "\n");
  auto pairs = load_dataset(path, DatasetFormat::kJsonl);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].code_tokens == std::vector<std::string>{"int", "x", ";"});
  CHECK(pairs[0].comment_tokens == std::vector<std::string>{"sets", "x"});
}

TEST_CASE("empty file yields no pairs") {
  CHECK(load_dataset(temp_file("empty.jsonl", ""), DatasetFormat::kJsonl).empty());
}

TEST_CASE("malformed records name their line") {
  try {
    load_raw_dataset(temp_file("bad.tsv", "only one column\n"), DatasetFormat::kTsv);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(e.line() == 1);
  }
  try {
    load_raw_dataset(temp_file("bad.jsonl", R"({"code":"a","comment":"b"})" "\n" R"({"code":"a"})" "\n"),
                     DatasetFormat::kJsonl);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_raw_dataset(temp_file("utf.tsv", "a\xff\tb\n"), DatasetFormat::kTsv), DatasetError);
  CHECK_THROWS(load_raw_dataset("/nonexistent/file.jsonl", DatasetFormat::kJsonl));
}

TEST_CASE("literals become NUM and STR, truncation keeps the prefix") {
  ParallelPair p{"x", {"return", "42", "+", "\"hello\"", ";"}, {"Returns", "IT"}};
  auto q = preprocess(p);
  CHECK(q.code_tokens[1] == "NUM");
  CHECK(q.code_tokens[3] == "STR");
  CHECK(q.comment_tokens == std::vector<std::string>{"returns", "it"});

  ParallelPair long_pair;
  for (int i = 0; i < 305; ++i) long_pair.code_tokens.push_back("t" + std::to_string(i));
  for (int i = 0; i < 40; ++i) long_pair.comment_tokens.push_back("w" + std::to_string(i));
  auto cut = preprocess(long_pair);
  REQUIRE(cut.code_tokens.size() == 300);
  CHECK(cut.code_tokens.back() == "t299");
  CHECK(cut.comment_tokens.size() == 30);
}

TEST_CASE("preprocess is idempotent") {
  for (const auto& m : synthesize_methods(200, 4)) {
    auto once = preprocess(to_pair({m.id, m.code, m.comment, 0}));
    CHECK(preprocess(once) == once);
  }
}

TEST_CASE("vocabulary frequency filter and ordering") {
  std::vector<ParallelPair> corpus{{"0", {"a", "a", "b"}, {"x"}}};
  auto v = build_vocab(corpus, Side::kCode, 2);
  CHECK(v.size() == Vocabulary::kSpecialCount + 1);
  CHECK(v.contains("a"));
  CHECK_FALSE(v.contains("b"));
  CHECK(build_vocab(corpus, Side::kCode, 2) == v);

  std::vector<ParallelPair> xy{{"0", {"x", "y"}, {"c"}}};
  auto all = build_vocab(xy, Side::kCode, 1);
  CHECK(all.contains("x"));
  CHECK(all.contains("y"));
  CHECK_THROWS_AS(build_vocab({}, Side::kCode, 1), Error);

  std::vector<ParallelPair> ties{{"0", {"b", "a", "c", "c"}, {"z"}}};
  auto t = build_vocab(ties, Side::kCode, 1);
  CHECK(t.token(4) == "c");
  CHECK(t.token(5) == "a");
  CHECK(t.token(6) == "b");
}

TEST_CASE("vocabulary index round trip and save/load") {
  auto pairs = synth_pairs(100, 8);
  auto v = build_vocab(pairs, Side::kComment, 2);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index(v.token(i)) == i);
  for (const auto& p : pairs) {
    for (const auto& tok : p.comment_tokens) {
      auto idx = v.index(tok);
      if (v.contains(tok)) CHECK(v.token(idx) == tok);
      else CHECK(idx == Vocabulary::kUnk);
    }
  }
  auto path = fs::temp_directory_path() / "lamner_corpus_test" / "comment.vocab";
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
}

TEST_CASE("split sizes and partition") {
  SplitSpec spec;
  auto [tr, va, te] = split_sizes(10, spec);
  CHECK(tr == 8);
  CHECK(va == 1);
  CHECK(te == 1);
  auto [ptr, pva, pte] = split_sizes(87136, spec);
  CHECK(pva == 8714);
  CHECK(pte == 8714);
  CHECK(ptr == 69708);

  auto pairs = synth_pairs(97, 3);
  auto s1 = split(pairs, spec);
  auto s2 = split(pairs, spec);
  CHECK(s1.train == s2.train);
  CHECK(s1.test == s2.test);
  CHECK(s1.train.size() + s1.valid.size() + s1.test.size() == pairs.size());

  std::map<std::string, int> seen;
  for (const auto* part : {&s1.train, &s1.valid, &s1.test}) {
    for (const auto& p : *part) ++seen[p.id];
  }
  CHECK(seen.size() == pairs.size());
  for (const auto& [id, n] : seen) CHECK(n == 1);

  SplitSpec other = spec;
  other.seed = 14;
  CHECK(split(pairs, other).train != s1.train);
  SplitSpec bad = spec;
  bad.test_fraction = 0.3;
  CHECK_THROWS_AS(split(pairs, bad), Error);
}

TEST_CASE("code line spans cover each token") {
  std::vector<std::string> toks{"public", "int", "size", "(", ")"};
  auto line = code_line(toks);
  CHECK(line == "public int size ( )");
  auto spans = code_line_spans(toks);
  REQUIRE(spans.size() == toks.size());
  for (std::size_t i = 0; i < toks.size(); ++i) {
    CHECK(line.substr(spans[i].first, spans[i].second - spans[i].first) == toks[i]);
  }
}

TEST_CASE("comment tokenization splits terminal punctuation") {
  CHECK(tokenize_comment("Returns the Size.") == std::vector<std::string>{"returns", "the", "size", "."});
}
