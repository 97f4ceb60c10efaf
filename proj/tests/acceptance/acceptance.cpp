// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: lamner_acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lamner/char_lm.hpp"
#include "lamner/checkpoint.hpp"
#include "lamner/diagnostics.hpp"
#include "lamner/embedding_table.hpp"
#include "lamner/metrics.hpp"
#include "lamner/ner.hpp"
#include "lamner/pipeline.hpp"
#include "lamner/summarizer.hpp"
#include "lamner/synth.hpp"

#include "embedded.hpp"

using namespace lamner;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int number;
  std::string name;
  double limit_seconds;  // 0 = no bound
  std::function<Outcome()> run;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lamner_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------- 1
Outcome gradient_verification() {
  std::size_t checks = 0, failures = 0;
  std::string worst;
  double worst_ratio = 0.0;
  for (const auto& c : gradient_cases()) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const double err = c.run(seed);
      ++checks;
      if (!(err < c.tolerance)) ++failures;
      if (err / c.tolerance > worst_ratio) {
        worst_ratio = err / c.tolerance;
        worst = c.name + " seed " + std::to_string(seed) + " rel.err " + fmt("%.3g", err);
      }
    }
  }
  return {failures == 0, std::to_string(checks) + " checks (" + std::to_string(gradient_cases().size()) +
                             " scenarios x 20 seeds), " + std::to_string(failures) + " failures; worst " + worst};
}

// ---------------------------------------------------------------- 2
Outcome crf_oracle() {
  auto r = crf_oracle_check(100, 2021);
  const bool pass = r.instances == 100 && r.max_log_partition_error < 1e-8 && r.viterbi_failures == 0;
  return {pass, "100 instances, max |log Z error| " + fmt("%.3g", r.max_log_partition_error) +
                    ", max Viterbi gap " + fmt("%.3g", r.max_viterbi_gap) + ", " +
                    std::to_string(r.viterbi_failures) + " Viterbi mismatches"};
}

// ---------------------------------------------------------------- 3
Outcome metric_goldens() {
  std::size_t checks = 0;
  auto messages = check_metric_golden(embedded::kMetricGolden, embedded::kMetricGoldenReport, {}, &checks);
  std::string detail = std::to_string(checks) + " comparisons, " + std::to_string(messages.size()) + " mismatches";
  if (!messages.empty()) detail += "; first: " + messages.front();
  return {messages.empty() && checks > 0, detail};
}

// ---------------------------------------------------------------- 4
Outcome lexer_golden() {
  auto cases = parse_lexer_golden(embedded::kLexerGolden);
  bool has_example = false;
  std::size_t tokens = 0;
  for (const auto& c : cases) {
    has_example |= c.source.find("public Boolean getBoolean2") != std::string::npos;
    tokens += c.expected.size();
  }
  auto messages = check_lexer_golden(cases);
  std::string detail = std::to_string(cases.size()) + " methods, " + std::to_string(tokens) + " tokens, " +
                       std::to_string(messages.size()) + " disagreements";
  if (!messages.empty()) detail += "; first: " + messages.front();
  return {messages.empty() && cases.size() >= 30 && has_example, detail};
}

// ---------------------------------------------------------------- 5
Outcome char_lm_memorization() {
  // Distinct first characters, so each line is recoverable from its first byte.
  const std::vector<std::string> lines = {
      "public int size ( ) { return size ; }",
      "return count + 1 ;",
      "int total = 0 ;",
      "for ( int i = 0 ; i < n ; i ++ ) { }",
      "while ( it . hasNext ( ) ) { it . next ( ) ; }",
      "do { count ++ ; } while ( count < 3 ) ;",
      "String name = user . getName ( ) ;",
      "boolean done = true ;",
      "x = y * 2 ;",
      "throw new IllegalStateException ( STR ) ;",
  };
  CharLmConfig c;
  c.char_dim = 16;
  c.hidden = 64;
  c.epochs = 200;
  c.batch_size = 1;
  c.learning_rate = 1.0;
  c.dropout = 0.0;
  c.seed = 7;
  auto lm = train_char_lm(lines, c);
  const double loss = lm.loss(lines);
  std::size_t exact = 0;
  for (const auto& line : lines) {
    if (lm.generate(line.substr(0, 1), line.size() + 10) == line) ++exact;
  }
  return {loss < 0.1 && exact == lines.size(),
          "loss " + fmt("%.4f", loss) + " nats/char, " + std::to_string(exact) + "/10 lines regenerated exactly"};
}

// ---------------------------------------------------------------- 6
Outcome ner_held_out() {
  std::vector<std::string> train_sources, test_sources;
  for (const auto& m : synthesize_methods(1000, 101, "train")) train_sources.push_back(m.code);
  for (const auto& m : synthesize_methods(1000, 202, "test")) test_sources.push_back(m.code);
  const auto train = label_methods(train_sources);
  const auto test = label_methods(test_sources);

  std::vector<std::vector<std::string>> corpus;
  std::vector<ParallelPair> pairs;
  std::vector<std::string> lines;
  for (const auto& s : train) {
    corpus.push_back(s.tokens);
    pairs.push_back({"", s.tokens, {"x"}});
    lines.push_back(code_line(s.tokens));
  }
  CharLmConfig lm_config;
  lm_config.char_dim = 16;
  lm_config.hidden = 32;
  lm_config.epochs = 3;
  lm_config.batch_size = 8;
  lm_config.learning_rate = 0.5;
  lm_config.seed = 1;
  const auto lm = train_char_lm(lines, lm_config);
  const auto vocab = build_vocab(pairs, Side::kCode, 2);
  const auto semantic = build_semantic_table(lm, corpus, vocab, 4);

  NerConfig ner_config;
  ner_config.proj = 32;
  ner_config.hidden = 32;
  ner_config.epochs = 5;
  ner_config.batch_size = 8;
  ner_config.learning_rate = 0.05;
  ner_config.seed = 2;
  const auto model = train_ner(train, semantic, ner_config);
  const auto ev = evaluate_ner(model, test);
  return {ev.micro_f1 >= 0.95, "held-out micro-F1 " + fmt("%.4f", ev.micro_f1) + " over " +
                                   std::to_string(ev.tokens) + " tokens of " + std::to_string(test.size()) +
                                   " methods (P " + fmt("%.4f", ev.micro_precision) + ", R " +
                                   fmt("%.4f", ev.micro_recall) + ")"};
}

// ---------------------------------------------------------------- 7, 8, 10
struct OverfitSetup {
  std::vector<ParallelPair> pairs;
  Vocabulary code_vocab;
  Vocabulary comment_vocab;
  EmbeddingTable semantic;
  EmbeddingTable syntactic;
  SummarizerConfig config;
};

const OverfitSetup& overfit_setup() {
  static const OverfitSetup setup = [] {
    OverfitSetup s;
    std::vector<std::string> sources, lines;
    for (const auto& m : synthesize_methods(50, 31, "o")) {
      s.pairs.push_back(preprocess(to_pair({m.id, m.code, m.comment, 0})));
      sources.push_back(m.code);
    }
    s.code_vocab = build_vocab(s.pairs, Side::kCode, 1);
    s.comment_vocab = build_vocab(s.pairs, Side::kComment, 1);
    std::vector<std::vector<std::string>> corpus;
    for (const auto& p : s.pairs) {
      corpus.push_back(p.code_tokens);
      lines.push_back(code_line(p.code_tokens));
    }
    CharLmConfig lm_config;
    lm_config.char_dim = 16;
    lm_config.hidden = 32;
    lm_config.epochs = 5;
    lm_config.batch_size = 4;
    lm_config.learning_rate = 0.5;
    const auto lm = train_char_lm(lines, lm_config);
    s.semantic = build_semantic_table(lm, corpus, s.code_vocab, 4);
    NerConfig ner_config;
    ner_config.proj = 32;
    ner_config.hidden = 32;
    ner_config.epochs = 5;
    ner_config.batch_size = 4;
    ner_config.learning_rate = 0.05;
    const auto ner = train_ner(label_methods(sources), s.semantic, ner_config);
    s.syntactic = build_syntactic_table(ner, corpus, s.code_vocab, 5);

    s.config.mode = SummarizerMode::kLamner;
    s.config.enc_hidden = 64;
    s.config.dec_hidden = 128;
    s.config.comment_dim = 64;
    s.config.attention_dim = 64;
    s.config.epochs = 100;
    s.config.batch_size = 1;
    s.config.learning_rate = 0.5;
    s.config.dropout = 0.1;
    s.config.seed = 3;
    return s;
  }();
  return setup;
}

struct AttentionAudit {
  std::size_t rows = 0;
  double worst = 0.0;  // max |row sum - 1|
  bool negative = false;
  bool shape_ok = true;

  void add(const Generation& g, std::size_t source_len) {
    if (g.attention.rows() != g.tokens.size()) shape_ok = false;
    for (std::size_t r = 0; r < g.attention.rows(); ++r) {
      if (g.attention.cols() != source_len) shape_ok = false;
      double sum = 0.0;
      for (double w : g.attention.row(r)) {
        if (w < 0.0) negative = true;
        sum += w;
      }
      worst = std::max(worst, std::abs(sum - 1.0));
      ++rows;
    }
  }
  bool ok() const { return rows > 0 && worst <= 1e-6 && !negative && shape_ok; }
};

std::vector<std::vector<std::string>> generations(const SummarizerModel& model, const std::vector<ParallelPair>& pairs,
                                                  AttentionAudit* audit) {
  std::vector<std::vector<std::string>> out;
  for (const auto& p : pairs) {
    auto g = model.generate(p.code_tokens);
    if (audit) audit->add(g, p.code_tokens.size());
    out.push_back(g.tokens);
  }
  return out;
}

double bleu1_of(const std::vector<std::vector<std::string>>& gens, const std::vector<ParallelPair>& pairs) {
  std::vector<EvalPair> eval;
  for (std::size_t i = 0; i < pairs.size(); ++i) eval.push_back({gens[i], {pairs[i].comment_tokens}});
  return bleu(eval, 1);
}

const SummarizerModel& overfit_model(AttentionAudit* during = nullptr) {
  static AttentionAudit audit;
  static const SummarizerModel model = [] {
    const auto& s = overfit_setup();
    const auto table = code_table_for_mode(SummarizerMode::kLamner, &s.semantic, &s.syntactic);
    SummarizerHooks hooks;
    hooks.on_epoch = [&](const SummarizerModel& m, int epoch) {
      if (epoch % 10 == 0) generations(m, s.pairs, &audit);
    };
    return train_summarizer(s.pairs, s.code_vocab, s.comment_vocab, table, s.config, nullptr, nullptr, hooks);
  }();
  if (during) *during = audit;
  return model;
}

Outcome summarizer_overfit() {
  const auto& s = overfit_setup();
  AttentionAudit audit;
  const auto& model = overfit_model(&audit);
  const auto gens = generations(model, s.pairs, &audit);
  const double b1 = bleu1_of(gens, s.pairs);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < gens.size(); ++i) exact += gens[i] == s.pairs[i].comment_tokens;
  return {b1 >= 90.0 && audit.ok(),
          "corpus BLEU-1 " + fmt("%.2f", b1) + " on 50 training pairs (" + std::to_string(exact) +
              " exact), code width " + std::to_string(model.code_dim()) + "; " + std::to_string(audit.rows) +
              " attention rows, max |sum - 1| " + fmt("%.2g", audit.worst)};
}

Outcome mode_ablation() {
  const auto& s = overfit_setup();
  Rng rng(404);
  EmbeddingTable sem(256), syn(256);
  std::vector<double> row(256);
  for (const auto& tok : s.code_vocab.tokens()) {
    for (auto& v : row) v = rng.uniform(-0.1, 0.1);
    sem.add(tok, row);
    for (auto& v : row) v = rng.uniform(-0.1, 0.1);
    syn.add(tok, row);
  }
  SummarizerConfig c = s.config;
  c.enc_hidden = 16;
  c.dec_hidden = 32;
  c.comment_dim = 16;
  c.attention_dim = 16;
  c.epochs = 2;
  std::ostringstream detail;
  bool pass = true;
  const std::vector<std::pair<SummarizerMode, std::size_t>> expected = {
      {SummarizerMode::kLam, 256}, {SummarizerMode::kNer, 256}, {SummarizerMode::kLamner, 512}, {SummarizerMode::kStatic, 512}};
  for (const auto& [mode, width] : expected) {
    c.mode = mode;
    c.code_dim = width;
    const auto table = code_table_for_mode(mode, &sem, &syn);
    const Matrix initial = SummarizerModel(s.code_vocab, s.comment_vocab, table, c).code_embedding();
    bool frozen = true;
    SummarizerHooks hooks;
    hooks.on_epoch = [&](const SummarizerModel& m, int) { frozen &= m.code_embedding() == initial; };
    auto model = train_summarizer(s.pairs, s.code_vocab, s.comment_vocab, table, c, nullptr, nullptr, hooks);
    AttentionAudit audit;
    generations(model, s.pairs, &audit);
    const bool width_ok = model.code_dim() == width;
    const bool frozen_ok = mode == SummarizerMode::kStatic ? frozen : !frozen;
    pass &= width_ok && frozen_ok && audit.ok();
    if (detail.tellp() > 0) detail << "; ";
    detail << mode_name(mode) << " width " << model.code_dim()
           << (mode == SummarizerMode::kStatic ? (frozen ? " frozen" : " CHANGED") : (frozen ? " NOT tuned" : " tuned"));
  }
  return {pass, detail.str()};
}

Outcome external_table_swap() {
  const auto& s = overfit_setup();
  const auto dir = scratch("external");
  Rng rng(909);
  EmbeddingTable ext(48);
  std::vector<double> row(48);
  for (const auto& tok : s.code_vocab.tokens()) {
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    ext.add(tok, row);
  }
  ext.save(dir / "external.vec");
  const auto loaded = EmbeddingTable::load(dir / "external.vec");
  SummarizerConfig c = s.config;
  auto model = train_summarizer(s.pairs, s.code_vocab, s.comment_vocab, loaded, c);
  const auto& reference = overfit_model();
  const auto ours = generations(model, s.pairs, nullptr);
  const auto theirs = generations(reference, s.pairs, nullptr);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < ours.size(); ++i) differing += ours[i] != theirs[i];
  const bool width_ok = model.code_dim() == 48;
  const bool init_ok = [&] {
    const auto idx = s.code_vocab.index("return");
    const SummarizerModel fresh(s.code_vocab, s.comment_vocab, loaded, c);
    const auto r = fresh.code_embedding().row(idx);
    const auto e = ext.row("return");
    return std::equal(r.begin(), r.end(), e.begin());
  }();
  return {width_ok && init_ok && differing > 0,
          "48-wide .vec table loaded and trained; " + std::to_string(differing) +
              "/50 generations differ from the LAMNER model; BLEU-1 " + fmt("%.2f", bleu1_of(ours, s.pairs))};
}

// ---------------------------------------------------------------- 9
Outcome determinism() {
  const fs::path conf = fs::path(LAMNER_SOURCE_DIR) / "configs" / "demo.conf";
  std::vector<fs::path> dirs = {scratch("determinism_a"), scratch("determinism_b")};
  for (const auto& d : dirs) {
    auto config = load_config(conf);
    config.work_dir = d;
    run_pipeline(config, {.force = true, .log = {}});
  }
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dirs[0]);
    if (rel == "manifest.json") continue;  // holds wall-clock timings
    ++compared;
    const auto other = dirs[1] / rel;
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) differing.push_back(rel.string());
  }
  auto count = [](const fs::path& d) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(d)) n += e.is_regular_file();
    return n;
  };
  const bool same_count = count(dirs[0]) == count(dirs[1]);
  std::string detail = std::to_string(compared) +
                       " files compared (checkpoints, tables, generations, attention, reports), " +
                       std::to_string(differing.size()) + " differ";
  if (!differing.empty()) detail += "; first: " + differing.front();
  const bool has_all = fs::exists(dirs[0] / "models/summarizer.ckpt") &&
                       fs::exists(dirs[0] / "outputs/predictions.jsonl") && fs::exists(dirs[0] / "outputs/report.json");
  return {differing.empty() && same_count && has_all && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient verification", 300, gradient_verification},
      {2, "CRF oracle equivalence", 60, crf_oracle},
      {3, "metric golden suite", 60, metric_goldens},
      {4, "lexer golden corpus", 60, lexer_golden},
      {5, "char-LM memorization", 300, char_lm_memorization},
      {6, "NER held-out micro-F1", 1200, ner_held_out},
      {7, "summarizer overfit", 1200, summarizer_overfit},
      {8, "mode ablation shapes", 300, mode_ablation},
      {9, "pipeline determinism", 0, determinism},
      {10, "external table hook", 0, external_table_swap},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds <= 0 || seconds < c.limit_seconds;
    const bool pass = outcome.pass && in_time;
    failed += !pass;
    std::string bound = c.limit_seconds > 0 ? " / limit " + fmt("%.0f s", c.limit_seconds) : "";
    std::printf("[%s] %2d %-26s %8.1f s%s  %s%s\n", pass ? "PASS" : "FAIL", c.number, c.name.c_str(), seconds,
                bound.c_str(), outcome.detail.c_str(), in_time ? "" : " (time limit exceeded)");
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
