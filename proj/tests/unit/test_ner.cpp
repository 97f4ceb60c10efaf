#include <doctest.h>

#include <cmath>
#include <set>

#include "lamner/error.hpp"
#include "lamner/ner.hpp"
#include "lamner/pipeline.hpp"
#include "lamner/synth.hpp"

using namespace lamner;

namespace {

using L = EntityLabel;

EmbeddingTable random_table(const std::vector<LabeledSequence>& data, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingTable table(dim);
  std::vector<double> row(dim);
  for (const auto& seq : data) {
    for (const auto& tok : seq.tokens) {
      if (table.contains(tok)) continue;
      for (auto& v : row) v = rng.uniform(-0.5, 0.5);
      table.add(tok, row);
    }
  }
  return table;
}

NerConfig toy_config() {
  NerConfig c;
  c.proj = 16;
  c.hidden = 16;
  c.epochs = 30;
  c.batch_size = 4;
  c.learning_rate = 0.1;
  c.seed = 2;
  return c;
}

std::vector<LabeledSequence> toy_corpus() {
  std::vector<std::string> sources{"public Boolean getBoolean2 ( ) { }"};
  for (const auto& m : synthesize_methods(49, 17)) sources.push_back(m.code);
  return label_methods(sources);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("conll text round trips and reports bad lines") {
  std::vector<LabeledSequence> seqs{{{"int", "x", ";"}, {L::kDataType, L::kObject, L::kEol}},
                                    {{"{", "}"}, {L::kBodyStartDelimiter, L::kBodyEndDelimiter}}};
  auto text = to_conll(seqs);
  auto back = parse_conll(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].tokens == seqs[0].tokens);
  CHECK(back[1].labels == seqs[1].labels);
  try {
    parse_conll("int\tdata-type\nx\tvariable\n");
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_conll("no-tab-here\n"), DatasetError);
}

TEST_CASE("perfect predictions score one everywhere") {
  std::vector<std::vector<L>> gold{{L::kModifier, L::kFunction, L::kEol}, {L::kObject}};
  auto ev = score_labels(gold, gold);
  CHECK(ev.micro_f1 == 1.0);
  CHECK(ev.micro_precision == 1.0);
  CHECK(ev.micro_recall == 1.0);
  CHECK(ev.per_label[static_cast<std::size_t>(L::kFunction)].f1 == 1.0);
  CHECK(ev.tokens == 4);
}

TEST_CASE("constant prediction on a balanced two-label corpus") {
  std::vector<std::vector<L>> gold{{L::kClass, L::kObject, L::kClass, L::kObject}};
  std::vector<std::vector<L>> pred{{L::kClass, L::kClass, L::kClass, L::kClass}};
  auto ev = score_labels(gold, pred);
  const auto& cls = ev.per_label[static_cast<std::size_t>(L::kClass)];
  CHECK(cls.recall == 1.0);
  CHECK(cls.precision == 0.5);
  const auto& obj = ev.per_label[static_cast<std::size_t>(L::kObject)];
  CHECK(obj.recall == 0.0);
  CHECK(obj.f1 == 0.0);
}

TEST_CASE("scores match a hand-computed confusion table") {
  // gold/pred pairs: (M,M) (M,F) (F,F) (F,F) (F,O) (O,O) (O,M)
  std::vector<std::vector<L>> gold{{L::kModifier, L::kModifier, L::kFunction, L::kFunction},
                                   {L::kFunction, L::kObject, L::kObject}};
  std::vector<std::vector<L>> pred{{L::kModifier, L::kFunction, L::kFunction, L::kFunction},
                                   {L::kObject, L::kObject, L::kModifier}};
  auto ev = score_labels(gold, pred);
  const auto& m = ev.per_label[static_cast<std::size_t>(L::kModifier)];
  const auto& f = ev.per_label[static_cast<std::size_t>(L::kFunction)];
  const auto& o = ev.per_label[static_cast<std::size_t>(L::kObject)];
  CHECK(m.precision == doctest::Approx(0.5));
  CHECK(m.recall == doctest::Approx(0.5));
  CHECK(f.precision == doctest::Approx(2.0 / 3.0));
  CHECK(f.recall == doctest::Approx(2.0 / 3.0));
  CHECK(o.precision == doctest::Approx(0.5));
  CHECK(o.recall == doctest::Approx(0.5));
  CHECK(f.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(ev.micro_precision == doctest::Approx(4.0 / 7.0));
  CHECK(ev.micro_recall == doctest::Approx(4.0 / 7.0));
  CHECK(ev.micro_f1 == doctest::Approx(4.0 / 7.0));
  CHECK_THROWS(score_labels(gold, {{L::kModifier}}));
}

TEST_CASE("tagger memorizes a toy corpus and the running example") {
  auto data = toy_corpus();
  REQUIRE(data.size() == 50);
  auto table = random_table(data, 12, 4);
  auto model = train_ner(data, table, toy_config());
  auto ev = evaluate_ner(model, data);
  CHECK(ev.micro_f1 == 1.0);
  CHECK(model.predict({"public", "Boolean", "getBoolean2", "(", ")", "{", "}"}) ==
        std::vector<L>{L::kModifier, L::kReturnType, L::kFunction, L::kOtherSeparator, L::kOtherSeparator,
                       L::kBodyStartDelimiter, L::kBodyEndDelimiter});

  auto again = train_ner(data, table, toy_config());
  const auto bytes = model.to_checkpoint().serialize();
  CHECK(again.to_checkpoint().serialize() == bytes);
  auto restored = NerModel::from_checkpoint(Checkpoint::deserialize(bytes));
  CHECK(restored.emissions(data[3].tokens) == model.emissions(data[3].tokens));
}

TEST_CASE("syntactic table rows are mean contextual states") {
  auto data = toy_corpus();
  auto table = random_table(data, 12, 4);
  auto model = train_ner(data, table, toy_config());

  std::vector<std::vector<std::string>> corpus;
  for (const auto& s : data) corpus.push_back(s.tokens);
  std::vector<ParallelPair> pairs;
  for (const auto& s : data) pairs.push_back({"", s.tokens, {"x"}});
  auto vocab = build_vocab(pairs, Side::kCode, 1);
  auto syn = build_syntactic_table(model, corpus, vocab, 5);
  CHECK(syn.dim() == model.output_dim());
  CHECK(build_syntactic_table(model, corpus, vocab, 5) == syn);

  // "getBoolean2" occurs once, in the first sequence.
  auto states = model.contextual_states(data[0].tokens);
  auto row = syn.row("getBoolean2");
  for (std::size_t k = 0; k < syn.dim(); ++k) CHECK(row[k] == states(2, k));

  // Tokens grouped by their majority label are closer within than across groups.
  std::map<std::string, std::map<L, int>> votes;
  for (const auto& s : data) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) ++votes[s.tokens[i]][s.labels[i]];
  }
  std::vector<std::pair<std::string, L>> typed;
  for (const auto& [tok, counts] : votes) {
    auto best = std::max_element(counts.begin(), counts.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    typed.emplace_back(tok, best->first);
  }
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < typed.size(); ++i) {
    for (std::size_t j = i + 1; j < typed.size(); ++j) {
      const double c = cosine(syn.row(typed[i].first), syn.row(typed[j].first));
      if (typed[i].second == typed[j].second) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  }
  CHECK(intra / static_cast<double>(n_intra) > inter / static_cast<double>(n_inter));
}

TEST_CASE("label_methods uses a corpus-wide class index") {
  auto seqs = label_methods({"Widget w = null ;", "widget ( ) ;"});
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[1].labels[0] == L::kObject);
  auto skipped = label_methods({"String s = \"open ;", "int x ;"});
  CHECK(skipped.size() == 1);
}
