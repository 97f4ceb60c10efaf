#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lamner/embedding_table.hpp"
#include "lamner/error.hpp"

using namespace lamner;

TEST_CASE("text format round trips exactly") {
  EmbeddingTable t(3);
  t.add("foo", std::vector<double>{0.1, -2.5e-17, 3.0});
  t.add("<unk>", std::vector<double>{1.0 / 3.0, 0.0, -7.25});
  auto text = t.to_text();
  CHECK(text.rfind("2 3\n", 0) == 0);
  CHECK(EmbeddingTable::from_text(text) == t);

  auto path = std::filesystem::temp_directory_path() / "lamner_table_test.vec";
  t.save(path);
  CHECK(EmbeddingTable::load(path) == t);
}

TEST_CASE("space-separated token column is accepted") {
  auto t = EmbeddingTable::from_text("1 2\nword 0.5 -1\n");
  REQUIRE(t.contains("word"));
  CHECK(t.row("word")[1] == -1.0);
}

TEST_CASE("malformed tables are rejected") {
  CHECK_THROWS(EmbeddingTable::from_text("2 2\na\t1 2\n"));
  CHECK_THROWS(EmbeddingTable::from_text("1 3\na\t1 2\n"));
  CHECK_THROWS(EmbeddingTable::from_text("1 2\na\t1 x\n"));
  EmbeddingTable t(2);
  t.add("a", std::vector<double>{1, 2});
  CHECK_THROWS(t.add("a", std::vector<double>{1, 2}));
  CHECK_THROWS(t.add("b", std::vector<double>{1}));
}

TEST_CASE("concatenation puts the left table first") {
  EmbeddingTable left(2), right(1);
  left.add("x", std::vector<double>{1, 2});
  left.add("y", std::vector<double>{3, 4});
  right.add("y", std::vector<double>{40});
  right.add("x", std::vector<double>{20});
  auto both = concat_tables(left, right);
  CHECK(both.dim() == 3);
  CHECK(both.tokens() == left.tokens());
  auto row = both.row("y");
  CHECK(std::vector<double>(row.begin(), row.end()) == std::vector<double>{3, 4, 40});

  EmbeddingTable other(1);
  other.add("z", std::vector<double>{0});
  other.add("x", std::vector<double>{0});
  try {
    concat_tables(left, other);
    FAIL("expected Error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find('y') != std::string::npos);
    CHECK(msg.find('z') != std::string::npos);
  }
}

TEST_CASE("mean builder averages occurrences and seeds fallbacks") {
  Vocabulary vocab({"a", "b", "c"});
  MeanTableBuilder builder(vocab, 2, 2);
  CHECK(builder.wants("a"));
  CHECK_FALSE(builder.wants("zzz"));
  builder.add("a", std::vector<double>{1, 2});
  builder.add("a", std::vector<double>{3, 6});
  CHECK_FALSE(builder.wants("a"));
  builder.add("b", std::vector<double>{-1, 0.5});
  std::vector<std::string> fallback;
  auto table = builder.finish(9, &fallback);
  CHECK(table.size() == vocab.size());
  CHECK(table.row("a")[0] == 2.0);
  CHECK(table.row("a")[1] == 4.0);
  CHECK(table.row("b")[1] == 0.5);
  CHECK(std::find(fallback.begin(), fallback.end(), "c") != fallback.end());
  for (double v : table.row("c")) CHECK(std::abs(v) <= 0.05);
  for (double v : table.row("<unk>")) CHECK(std::abs(v) <= 0.05);
  CHECK(builder.finish(9) == table);
  CHECK_FALSE(builder.finish(10) == table);
}
