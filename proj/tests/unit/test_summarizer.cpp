#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "lamner/error.hpp"
#include "lamner/metrics.hpp"
#include "lamner/summarizer.hpp"

using namespace lamner;

namespace {

std::vector<ParallelPair> toy_pairs() {
  return {
      {"0", {"public", "int", "size", "(", ")", "{", "return", "size", ";", "}"}, {"returns", "the", "size", "."}},
      {"1", {"public", "void", "clear", "(", ")", "{", "items", ".", "clear", "(", ")", ";", "}"},
       {"removes", "all", "items", "."}},
      {"2", {"public", "String", "name", "(", ")", "{", "return", "name", ";", "}"}, {"returns", "the", "name", "."}},
  };
}

EmbeddingTable random_table(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingTable t(dim);
  std::vector<double> row(dim);
  for (const auto& tok : vocab.tokens()) {
    for (auto& v : row) v = rng.uniform(-0.5, 0.5);
    t.add(tok, row);
  }
  return t;
}

SummarizerConfig micro_config() {
  SummarizerConfig c;
  c.enc_hidden = 6;
  c.dec_hidden = 12;
  c.comment_dim = 8;
  c.attention_dim = 8;
  c.epochs = 5;
  c.batch_size = 1;
  c.learning_rate = 0.5;
  c.dropout = 0.0;
  c.seed = 9;
  return c;
}

struct Fixture {
  std::vector<ParallelPair> pairs = toy_pairs();
  Vocabulary code_vocab = build_vocab(pairs, Side::kCode, 1);
  Vocabulary comment_vocab = build_vocab(pairs, Side::kComment, 1);
  EmbeddingTable table = random_table(code_vocab, 10, 3);

  SummarizerModel model(const SummarizerConfig& c = micro_config()) const {
    return SummarizerModel(code_vocab, comment_vocab, table, c);
  }
};

}  // namespace

TEST_CASE("identity bridge gives tanh of the last encoder state") {
  Fixture f;
  auto m = f.model();
  auto& w = m.param("summ.bridge.weight").value;
  w.fill(0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) w(i, i) = 1.0;
  m.param("summ.bridge.bias").value.fill(0.0);
  auto out = m.encode(f.code_vocab.encode(f.pairs[0].code_tokens));
  REQUIRE(out.h_last.size() == out.h_final.size());
  for (std::size_t k = 0; k < out.h_last.size(); ++k) CHECK(out.h_final[k] == std::tanh(out.h_last[k]));
}

TEST_CASE("single token encoder state is one step in each direction") {
  Fixture f;
  auto m = f.model();
  const std::size_t id = f.code_vocab.index("size");
  auto out = m.encode({id});
  nn::GruCell fwd("summ.enc.fwd", 10, 6), bwd("summ.enc.bwd", 10, 6);
  fwd.w = m.param("summ.enc.fwd.w");
  fwd.u = m.param("summ.enc.fwd.u");
  fwd.b = m.param("summ.enc.fwd.b");
  bwd.w = m.param("summ.enc.bwd.w");
  bwd.u = m.param("summ.enc.bwd.u");
  bwd.b = m.param("summ.enc.bwd.b");
  nn::GruCell::Cache cf, cb;
  Vec zero(6, 0.0);
  fwd.step(m.code_embedding().row(id), zero, cf);
  bwd.step(m.code_embedding().row(id), zero, cb);
  CHECK(out.h_last == concat(cf.h, cb.h));
  CHECK_THROWS_AS(m.encode({}), Error);
}

TEST_CASE("bridge output stays inside (-1, 1)") {
  Fixture f;
  auto m = f.model();
  for (auto& v : m.param("summ.bridge.weight").value.data()) v *= 3.0;
  for (const auto& p : f.pairs) {
    for (double v : m.encode(f.code_vocab.encode(p.code_tokens)).h_final) CHECK(std::abs(v) < 1.0);
  }
}

TEST_CASE("attention edge cases") {
  Fixture f;
  auto m = f.model();
  Vec state(12, 0.2);
  Matrix one(1, 12);
  for (std::size_t k = 0; k < 12; ++k) one(0, k) = 0.1 * static_cast<double>(k);
  auto a = m.attend(state, one);
  CHECK(a.weights == Vec{1.0});
  CHECK(std::equal(a.context.begin(), a.context.end(), one.row(0).begin()));

  m.param("summ.attn.v").value.fill(0.0);
  Matrix many(4, 12, 0.3);
  many(2, 5) = -1.0;
  auto u = m.attend(state, many);
  for (double w : u.weights) CHECK(w == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("zero model predicts a uniform next token") {
  Fixture f;
  auto m = f.model();
  for (auto* p : m.params()) p->value.fill(0.0);
  auto enc = m.encode(f.code_vocab.encode(f.pairs[0].code_tokens));
  auto step = m.decode_step(Vocabulary::kSos, enc.h_final, enc.states);
  CHECK(step.logits.size() == f.comment_vocab.size());
  for (double l : step.logits) CHECK(l == 0.0);
  for (double p : nn::softmax(step.logits)) CHECK(p == doctest::Approx(1.0 / f.comment_vocab.size()));
}

TEST_CASE("generation respects the length cap and attention invariants") {
  Fixture f;
  auto m = f.model();
  CHECK(m.generate(f.pairs[0].code_tokens, 0).tokens.empty());
  for (std::size_t cap : {1u, 5u, 30u}) {
    for (const auto& p : f.pairs) {
      auto g = m.generate(p.code_tokens, cap);
      CHECK(g.tokens.size() <= cap);
      CHECK(g.attention.rows() == g.tokens.size());
      for (std::size_t r = 0; r < g.attention.rows(); ++r) {
        CHECK(g.attention.cols() == p.code_tokens.size());
        double sum = 0;
        for (double w : g.attention.row(r)) {
          CHECK(w >= 0.0);
          sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("overfitting one pair regenerates its comment and the loss falls") {
  Fixture f;
  std::vector<ParallelPair> one{f.pairs[1]};
  auto c = micro_config();
  c.epochs = 60;
  TrainHistory history;
  auto m = train_summarizer(one, f.code_vocab, f.comment_vocab, f.table, c, &history);
  CHECK(m.generate(f.pairs[1].code_tokens).tokens == f.pairs[1].comment_tokens);
  for (std::size_t e = 0; e < 5; ++e) CHECK(history.epoch_losses[e] > 0.0);
  for (std::size_t e = 1; e < 5; ++e) CHECK(history.epoch_losses[e] < history.epoch_losses[e - 1]);
  CHECK(m.loss(f.pairs[1]) > 0.0);

  auto greedy = m.generate(f.pairs[1].code_tokens, std::nullopt, 1);
  auto beam = m.generate(f.pairs[1].code_tokens, std::nullopt, 3);
  CHECK(beam.tokens == greedy.tokens);
}

TEST_CASE("mode tables and widths") {
  Fixture f;
  auto sem = random_table(f.code_vocab, 256, 1);
  auto syn = random_table(f.code_vocab, 256, 2);
  CHECK(code_table_for_mode(SummarizerMode::kLamner, &sem, &syn).dim() == 512);
  CHECK(code_table_for_mode(SummarizerMode::kStatic, &sem, &syn).dim() == 512);
  CHECK(code_table_for_mode(SummarizerMode::kLam, &sem, nullptr).dim() == 256);
  CHECK(code_table_for_mode(SummarizerMode::kNer, nullptr, &syn).dim() == 256);
  CHECK_THROWS_AS(code_table_for_mode(SummarizerMode::kLamner, &sem, nullptr), Error);
  CHECK(parse_mode("static") == SummarizerMode::kStatic);
  CHECK_THROWS(parse_mode("bogus"));

  for (auto mode : {SummarizerMode::kLamner, SummarizerMode::kLam, SummarizerMode::kNer, SummarizerMode::kStatic}) {
    auto table = code_table_for_mode(mode, &sem, &syn);
    auto c = micro_config();
    c.mode = mode;
    c.epochs = 1;
    auto m = train_summarizer(f.pairs, f.code_vocab, f.comment_vocab, table, c);
    CHECK(m.code_dim() == table.dim());
    CHECK(m.generate(f.pairs[0].code_tokens).tokens.size() <= c.max_len);
  }

  auto c = micro_config();
  c.code_dim = 512;
  CHECK_THROWS_AS(SummarizerModel(f.code_vocab, f.comment_vocab, sem, c), DimensionError);
}

TEST_CASE("static mode never changes the code embedding") {
  Fixture f;
  auto c = micro_config();
  c.mode = SummarizerMode::kStatic;
  c.epochs = 2;
  auto initial = f.model(c).code_embedding();
  int epochs_seen = 0;
  SummarizerHooks hooks;
  hooks.on_epoch = [&](const SummarizerModel& m, int) {
    ++epochs_seen;
    CHECK(m.code_embedding() == initial);
  };
  train_summarizer(f.pairs, f.code_vocab, f.comment_vocab, f.table, c, nullptr, nullptr, hooks);
  CHECK(epochs_seen == 2);

  c.mode = SummarizerMode::kLamner;
  auto tuned = train_summarizer(f.pairs, f.code_vocab, f.comment_vocab, f.table, c);
  CHECK_FALSE(tuned.code_embedding() == initial);
}

TEST_CASE("summarizer training is deterministic and checkpoints round trip") {
  Fixture f;
  auto c = micro_config();
  c.dropout = 0.1;
  auto a = train_summarizer(f.pairs, f.code_vocab, f.comment_vocab, f.table, c);
  auto b = train_summarizer(f.pairs, f.code_vocab, f.comment_vocab, f.table, c);
  const auto bytes = a.to_checkpoint().serialize();
  CHECK(b.to_checkpoint().serialize() == bytes);
  auto restored = SummarizerModel::from_checkpoint(Checkpoint::deserialize(bytes));
  CHECK(restored.generate(f.pairs[2].code_tokens).tokens == a.generate(f.pairs[2].code_tokens).tokens);
  CHECK(restored.loss(f.pairs[2]) == a.loss(f.pairs[2]));
}

TEST_CASE("attention export format") {
  Matrix att(3, 5);
  Rng rng(1);
  for (std::size_t r = 0; r < 3; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 5; ++c) sum += att(r, c) = rng.uniform();
    for (std::size_t c = 0; c < 5; ++c) att(r, c) /= sum;
  }
  std::vector<std::string> code{"a", "b", "c", "d", "e"}, comment{"x", "y", "z"};
  std::istringstream in(format_attention(att, code, comment));
  std::size_t rows = 0, cols = 0;
  in >> rows >> cols;
  CHECK(rows == 3);
  CHECK(cols == 5);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      double v = 0;
      in >> v;
      CHECK(v == att(r, c));
    }
  }
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line == "x\ty\tz");
  std::getline(in, line);
  CHECK(line == "a\tb\tc\td\te");

  CHECK(format_attention(Matrix(0, 4), {"a", "b", "c", "d"}, {}) == "0 4\n");
  auto path = std::filesystem::temp_directory_path() / "lamner_attention_test.txt";
  export_attention(att, code, comment, path);
  CHECK(read_file(path) == format_attention(att, code, comment));
}
