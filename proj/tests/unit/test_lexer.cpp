#include <doctest.h>

#include <string>
#include <vector>

#include "lamner/error.hpp"
#include "lamner/lexer.hpp"
#include "lamner/synth.hpp"

using namespace lamner;

namespace {

std::vector<std::string> texts(const TokenizedMethod& m) {
  std::vector<std::string> out;
  for (const auto& t : m.tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> label_names(const TokenizedMethod& m) {
  std::vector<std::string> out;
  for (const auto& t : m.tokens) out.emplace_back(label_name(*t.label));
  return out;
}

}  // namespace

TEST_CASE("line comments are dropped") {
  auto m = tokenize("int x = 5 ; // note");
  CHECK(texts(m) == std::vector<std::string>{"int", "x", "=", "5", ";"});
}

TEST_CASE("running example has seven tokens with the expected labels") {
  auto m = lex_and_label("public Boolean getBoolean2 ( ) { }");
  REQUIRE(m.tokens.size() == 7);
  CHECK(label_names(m) == std::vector<std::string>{"modifier", "return-type", "function", "other-separator",
                                                   "other-separator", "body-start-delimiter",
                                                   "body-end-delimiter"});
}

TEST_CASE("escaped quote stays inside one string literal") {
  auto m = tokenize(R"("a\"b")");
  REQUIRE(m.tokens.size() == 1);
  CHECK(m.tokens[0].kind == TokenKind::kString);
  CHECK(m.tokens[0].text == R"("a\"b")");
}

TEST_CASE("unterminated constructs raise LexError") {
  CHECK_THROWS_AS(tokenize("String s = \"abc;"), LexError);
  CHECK_THROWS_AS(tokenize("char c = 'a;"), LexError);
  CHECK_THROWS_AS(tokenize("int x; /* open"), LexError);
}

TEST_CASE("delimiters and eol") {
  auto m = lex_and_label("{ ; }");
  CHECK(label_names(m) == std::vector<std::string>{"body-start-delimiter", "eol", "body-end-delimiter"});
}

TEST_CASE("class before declaration, object before call of a same-named class") {
  auto m = lex_and_label("Foo foo = new Foo ( ) ;");
  REQUIRE(m.tokens.size() == 8);
  CHECK(label_names(m) == std::vector<std::string>{"class", "object", "operator", "keyword", "object",
                                                   "other-separator", "other-separator", "eol"});
}

TEST_CASE("call without a matching class is a function") {
  auto m = lex_and_label("run ( ) ;");
  CHECK(*m.tokens[0].label == EntityLabel::kFunction);
}

TEST_CASE("corpus class index turns a call into an object") {
  ClassIndex index;
  index.add(tokenize("Widget w ;"));
  auto m = label(tokenize("widget ( ) ;"), &index);
  CHECK(*m.tokens[0].label == EntityLabel::kObject);
  auto local = lex_and_label("widget ( ) ;");
  CHECK(*local.tokens[0].label == EntityLabel::kFunction);
}

TEST_CASE("sequence labels normalize literals and keep literal labels") {
  auto m = lex_and_label("return \"hi\" + 42 ;");
  auto seq = sequence_labels(m);
  REQUIRE(seq.size() == 5);
  CHECK(seq[1].first == "STR");
  CHECK(seq[1].second == EntityLabel::kString);
  CHECK(seq[3].first == "NUM");
  CHECK(seq[3].second == EntityLabel::kNumber);
}

TEST_CASE("plain declarations, empty body and boolean return") {
  auto decl = sequence_labels(lex_and_label("int x ;"));
  CHECK(decl[0].second == EntityLabel::kDataType);
  CHECK(decl[1].second == EntityLabel::kObject);
  auto empty = sequence_labels(lex_and_label("{ }"));
  REQUIRE(empty.size() == 2);
  CHECK(empty[0].second == EntityLabel::kBodyStartDelimiter);
  CHECK(empty[1].second == EntityLabel::kBodyEndDelimiter);
  auto ret = sequence_labels(lex_and_label("return true ;"));
  CHECK(ret[0].second == EntityLabel::kKeyword);
  CHECK(ret[1].second == EntityLabel::kBoolean);
  CHECK(ret[2].second == EntityLabel::kEol);
}

TEST_CASE("label names round trip") {
  for (auto l : all_labels()) CHECK(parse_label(label_name(l)) == l);
  CHECK_FALSE(parse_label("variable").has_value());
}

TEST_CASE("literal normalization") {
  CHECK(normalize_literal("0x1F") == "NUM");
  CHECK(normalize_literal("3.5e-2f") == "NUM");
  CHECK(normalize_literal("'c'") == "STR");
  CHECK(normalize_literal("name") == "name");
}

TEST_CASE("synthetic methods satisfy the lexer invariants") {
  for (const auto& method : synthesize_methods(300, 99)) {
    CAPTURE(method.code);
    auto m = lex_and_label(method.code);
    const auto stripped = strip_comments(method.code);
    std::size_t prev_end = 0;
    std::string rebuilt;
    long depth = 0;
    for (std::size_t i = 0; i < m.tokens.size(); ++i) {
      const auto& t = m.tokens[i];
      CHECK(t.start >= prev_end);
      CHECK(t.end > t.start);
      CHECK(m.source.substr(t.start, t.end - t.start) == t.text);
      REQUIRE(t.label.has_value());
      rebuilt += m.source.substr(prev_end, t.start - prev_end);
      rebuilt += t.text;
      prev_end = t.end;
      if (*t.label == EntityLabel::kClass && i + 1 < m.tokens.size()) CHECK(m.tokens[i + 1].text != "(");
      if (*t.label == EntityLabel::kBodyStartDelimiter) {
        CHECK(t.text == "{");
        ++depth;
      }
      if (*t.label == EntityLabel::kBodyEndDelimiter) --depth;
      CHECK(depth >= 0);
    }
    rebuilt += m.source.substr(prev_end);
    CHECK(depth == 0);
    CHECK(rebuilt == stripped);
    auto again = lex_and_label(method.code);
    CHECK(texts(again) == texts(m));
    CHECK(label_names(again) == label_names(m));
  }
}

TEST_CASE("comment stripping keeps spans exact") {
  const std::string src = "/** doc */ int /* inner */ x ; // tail\n}";
  auto m = tokenize(src);
  CHECK(texts(m) == std::vector<std::string>{"int", "x", ";", "}"});
  for (const auto& t : m.tokens) CHECK(src.substr(t.start, t.end - t.start) == t.text);
}
