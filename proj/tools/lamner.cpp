#include <cctype>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lamner/checkpoint.hpp"
#include "lamner/error.hpp"
#include "lamner/pipeline.hpp"
#include "lamner/synth.hpp"

namespace fs = std::filesystem;
using namespace lamner;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig config;
  std::optional<fs::path> explicit_path;
  if (!g.config_path.empty()) explicit_path = g.config_path;
  if (auto path = resolve_config_path(explicit_path)) config = load_config(*path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

std::vector<ParallelPair> load_pairs(const std::string& path, const PipelineConfig& config) {
  const DatasetFormat format = config.dataset_format == "auto" ? guess_dataset_format(path)
                                                                : *parse_dataset_format(config.dataset_format);
  std::vector<ParallelPair> out;
  for (auto& p : load_dataset(path, format)) out.push_back(preprocess(std::move(p), config.preprocess));
  return out;
}

std::vector<std::vector<std::string>> code_corpus(const std::vector<ParallelPair>& pairs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& p : pairs) out.push_back(p.code_tokens);
  return out;
}

std::vector<std::string> code_lines(const std::vector<ParallelPair>& pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) out.push_back(code_line(p.code_tokens));
  return out;
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    write_file_atomic(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LAMNER code comment generation pipeline"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_path, "Config file (defaults to $LAMNER_CONFIG)");
  app.add_option("--set", g.overrides, "Override a config setting, key=value (repeatable)");

  std::string input, output, valid, checkpoint, vocab, semantic, syntactic, table, references, predictions,
      attention_dir, side = "code", mode, code_vocab_path, comment_vocab_path;
  std::size_t min_count = 0, count = 200;
  std::uint64_t seed = 1;
  bool force = false;

  auto* lex = app.add_subcommand("lex", "Tokenize and label one Java file: text TAB label TAB start TAB end");
  lex->add_option("file", input, "Java source file")->required();

  auto* label_corpus = app.add_subcommand("label-corpus", "Write the rule-labeled tagger training file (CoNLL)");
  label_corpus->add_option("-i,--input", input, "Dataset (jsonl or tsv)")->required();
  label_corpus->add_option("-o,--out", output, "Output .conll file");

  auto* build_vocab_cmd = app.add_subcommand("build-vocab", "Build a code or comment vocabulary");
  build_vocab_cmd->add_option("-i,--input", input, "Dataset")->required();
  build_vocab_cmd->add_option("--side", side, "code or comment")->check(CLI::IsMember({"code", "comment"}));
  build_vocab_cmd->add_option("--min-count", min_count, "Minimum frequency (default from config)");
  build_vocab_cmd->add_option("-o,--out", output, "Vocabulary file")->required();

  auto* train_lm = app.add_subcommand("train-lm", "Train the character language models");
  train_lm->add_option("-i,--input", input, "Training dataset")->required();
  train_lm->add_option("--valid", valid, "Validation dataset");
  train_lm->add_option("-o,--out", output, "Checkpoint path")->required();

  auto* extract_semantic = app.add_subcommand("extract-semantic", "Build the semantic token table");
  extract_semantic->add_option("--checkpoint", checkpoint, "Language model checkpoint")->required();
  extract_semantic->add_option("-i,--input", input, "Dataset whose code tokens are embedded")->required();
  extract_semantic->add_option("--vocab", vocab, "Code vocabulary")->required();
  extract_semantic->add_option("-o,--out", output, "Table (.vec)")->required();

  auto* train_ner_cmd = app.add_subcommand("train-ner", "Train the BiLSTM-CRF tagger");
  train_ner_cmd->add_option("--train", input, "Training .conll")->required();
  train_ner_cmd->add_option("--valid", valid, "Validation .conll");
  train_ner_cmd->add_option("--semantic", semantic, "Semantic table (.vec)")->required();
  train_ner_cmd->add_option("-o,--out", output, "Checkpoint path")->required();

  auto* eval_ner = app.add_subcommand("eval-ner", "Score the tagger on a labeled file");
  eval_ner->add_option("--checkpoint", checkpoint, "Tagger checkpoint")->required();
  eval_ner->add_option("-i,--input", input, "Gold .conll")->required();
  eval_ner->add_option("-o,--out", output, "JSON output (table printed to stdout)");

  auto* extract_syntactic = app.add_subcommand("extract-syntactic", "Build the syntactic token table");
  extract_syntactic->add_option("--checkpoint", checkpoint, "Tagger checkpoint")->required();
  extract_syntactic->add_option("-i,--input", input, "Dataset whose code tokens are embedded")->required();
  extract_syntactic->add_option("--vocab", vocab, "Code vocabulary")->required();
  extract_syntactic->add_option("-o,--out", output, "Table (.vec)")->required();

  auto* concat = app.add_subcommand("concat-tables", "Concatenate semantic and syntactic tables");
  concat->add_option("--semantic", semantic, "Semantic table")->required();
  concat->add_option("--syntactic", syntactic, "Syntactic table")->required();
  concat->add_option("-o,--out", output, "Output table")->required();

  auto* train_summ = app.add_subcommand("train-summarizer", "Train the encoder-decoder");
  train_summ->add_option("--train", input, "Training dataset")->required();
  train_summ->add_option("--valid", valid, "Validation dataset");
  train_summ->add_option("--mode", mode, "lamner, lam, ner or static (default from config)");
  train_summ->add_option("--semantic", semantic, "Semantic table");
  train_summ->add_option("--syntactic", syntactic, "Syntactic table");
  train_summ->add_option("--table", table, "External code embedding table (.vec), replaces the mode's table");
  train_summ->add_option("--code-vocab", code_vocab_path, "Code vocabulary (built from --train if absent)");
  train_summ->add_option("--comment-vocab", comment_vocab_path, "Comment vocabulary (built from --train if absent)");
  train_summ->add_option("-o,--out", output, "Checkpoint path")->required();

  auto* generate = app.add_subcommand("generate", "Generate comments");
  generate->add_option("--checkpoint", checkpoint, "Summarizer checkpoint")->required();
  generate->add_option("-i,--input", input, "Dataset with code")->required();
  generate->add_option("-o,--out", output, "Predictions JSONL (stdout if absent)");
  generate->add_option("--attention-dir", attention_dir, "Write one attention file per record here");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against references");
  evaluate->add_option("--predictions", predictions, "Predictions JSONL")->required();
  evaluate->add_option("--references", references, "References JSONL {id, comment}")->required();
  evaluate->add_option("-o,--out", output, "Report JSON (table printed to stdout)");

  auto* run = app.add_subcommand("run-pipeline", "Run every stage, reusing up-to-date outputs");
  run->add_flag("--force", force, "Re-run every stage");

  app.add_subcommand("self-test", "Gradient checks, CRF enumeration, metric and lexer goldens");

  auto* synth = app.add_subcommand("synth", "Write template-generated Java methods with comments");
  synth->add_option("-n,--count", count, "Number of methods");
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("-o,--out", output, "Output JSONL")->required();

  app.add_subcommand("show-config", "Print the resolved configuration");

  CLI11_PARSE(app, argc, argv);
  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  try {
    const PipelineConfig config = resolve_config(g);

    if (name == "lex") {
      const TokenizedMethod m = lex_and_label(read_file(input));
      for (const auto& t : m.tokens) {
        std::cout << t.text << '\t' << label_name(*t.label) << '\t' << t.start << '\t' << t.end << '\n';
      }
    } else if (name == "label-corpus") {
      const DatasetFormat format = config.dataset_format == "auto" ? guess_dataset_format(input)
                                                                    : *parse_dataset_format(config.dataset_format);
      std::vector<std::string> sources;
      for (const auto& r : load_raw_dataset(input, format)) sources.push_back(r.code);
      write_out(output, to_conll(label_methods(sources, config.preprocess.max_code_len)));
    } else if (name == "build-vocab") {
      const auto pairs = load_pairs(input, config);
      build_vocab(pairs, side == "code" ? Side::kCode : Side::kComment, min_count ? min_count : config.min_count)
          .save(output);
    } else if (name == "train-lm") {
      const auto lines = code_lines(load_pairs(input, config));
      std::vector<std::string> valid_lines;
      if (!valid.empty()) valid_lines = code_lines(load_pairs(valid, config));
      CharLmConfig lm = config.lm;
      lm.verbose = true;
      train_char_lm(lines, lm, nullptr, valid.empty() ? nullptr : &valid_lines).to_checkpoint().save(output);
    } else if (name == "extract-semantic") {
      const CharLm lm = CharLm::from_checkpoint(Checkpoint::load(checkpoint));
      build_semantic_table(lm, code_corpus(load_pairs(input, config)), Vocabulary::load(vocab), config.seed + 3,
                           config.occurrence_cap)
          .save(output);
    } else if (name == "train-ner") {
      const auto train = read_conll(input);
      std::vector<LabeledSequence> valid_seqs;
      if (!valid.empty()) valid_seqs = read_conll(valid);
      NerConfig ner = config.ner;
      ner.verbose = true;
      train_ner(train, EmbeddingTable::load(semantic), ner, nullptr, valid.empty() ? nullptr : &valid_seqs)
          .to_checkpoint()
          .save(output);
    } else if (name == "eval-ner") {
      const NerModel model = NerModel::from_checkpoint(Checkpoint::load(checkpoint));
      const NerEvaluation eval = evaluate_ner(model, read_conll(input));
      std::cout << eval.to_table();
      if (!output.empty()) write_out(output, eval.to_json());
    } else if (name == "extract-syntactic") {
      const NerModel model = NerModel::from_checkpoint(Checkpoint::load(checkpoint));
      build_syntactic_table(model, code_corpus(load_pairs(input, config)), Vocabulary::load(vocab), config.seed + 4,
                            config.occurrence_cap)
          .save(output);
    } else if (name == "concat-tables") {
      concat_tables(EmbeddingTable::load(semantic), EmbeddingTable::load(syntactic)).save(output);
    } else if (name == "train-summarizer") {
      SummarizerConfig sc = config.summarizer;
      if (!mode.empty()) sc.mode = parse_mode(mode);
      sc.verbose = true;
      const auto train = load_pairs(input, config);
      std::vector<ParallelPair> valid_pairs;
      if (!valid.empty()) valid_pairs = load_pairs(valid, config);
      EmbeddingTable code_table;
      if (!table.empty()) {
        code_table = EmbeddingTable::load(table);
      } else {
        std::optional<EmbeddingTable> sem, syn;
        if (!semantic.empty()) sem = EmbeddingTable::load(semantic);
        if (!syntactic.empty()) syn = EmbeddingTable::load(syntactic);
        code_table = code_table_for_mode(sc.mode, sem ? &*sem : nullptr, syn ? &*syn : nullptr);
      }
      const Vocabulary cv = code_vocab_path.empty() ? build_vocab(train, Side::kCode, config.min_count)
                                                    : Vocabulary::load(code_vocab_path);
      const Vocabulary mv = comment_vocab_path.empty() ? build_vocab(train, Side::kComment, config.min_count)
                                                       : Vocabulary::load(comment_vocab_path);
      train_summarizer(train, cv, mv, code_table, sc, nullptr, valid.empty() ? nullptr : &valid_pairs)
          .to_checkpoint()
          .save(output);
    } else if (name == "generate") {
      const SummarizerModel model = SummarizerModel::from_checkpoint(Checkpoint::load(checkpoint));
      const auto pairs = load_pairs(input, config);
      std::vector<std::string> ids, preds;
      for (const auto& p : pairs) {
        const Generation gen = model.generate(p.code_tokens, config.summarizer.max_len, config.summarizer.beam_width);
        ids.push_back(p.id);
        preds.push_back(code_line(gen.tokens));
        if (!attention_dir.empty()) {
          std::string safe;
          for (char ch : p.id) safe += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' ? ch : '_';
          export_attention(gen.attention, p.code_tokens, gen.tokens, fs::path(attention_dir) / (safe + ".txt"));
        }
      }
      if (output.empty()) {
        for (std::size_t i = 0; i < ids.size(); ++i) std::cout << ids[i] << '\t' << preds[i] << '\n';
      } else {
        write_predictions(output, ids, preds);
      }
    } else if (name == "evaluate") {
      const MetricReport r = report(align_predictions(read_predictions(predictions), read_references(references)),
                                      config.metrics);
      std::cout << r.to_table();
      if (!output.empty()) write_out(output, r.to_json());
    } else if (name == "run-pipeline") {
      PipelineOptions opts;
      opts.force = force;
      opts.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
      const RunManifest m = run_pipeline(config, opts);
      const fs::path report_path = config.work_dir / "outputs/report.txt";
      if (fs::exists(report_path)) std::cout << read_file(report_path);
      (void)m;
    } else if (name == "self-test") {
      SelfTestOptions opts;
      opts.metrics = config.metrics;
      const auto suites = self_test(opts);
      std::cout << format_self_test(suites);
      for (const auto& s : suites) {
        if (!s.passed()) return 1;
      }
    } else if (name == "synth") {
      write_synth_jsonl(output, synthesize_methods(count, seed));
    } else if (name == "show-config") {
      std::cout << config.to_text();
    }
  } catch (const StageError& e) {
    std::cerr << "error: stage " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << name << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
