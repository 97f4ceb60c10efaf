#include "lamner/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "embedded.hpp"
#include "lamner/checkpoint.hpp"
#include "lamner/diagnostics.hpp"
#include "lamner/embedding_table.hpp"
#include "lamner/error.hpp"
#include "lamner/lexer.hpp"

namespace lamner {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw Error("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw Error("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw Error("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: " + key + " expects true or false, got '" + v + "'");
}

std::string anchor_name(BackwardAnchor a) {
  return a == BackwardAnchor::kAtFirstChar ? "at-first-char" : "before-first-char";
}

struct Field {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> put;
};

template <typename T>
Field size_field(std::string key, T PipelineConfig::*outer, std::size_t T::*member) {
  return {key, [=](const PipelineConfig& c) { return std::to_string(c.*outer.*member); },
          [=](PipelineConfig& c, const std::string& v) { c.*outer.*member = parse_size(key, v); }};
}

template <typename T>
Field real_field(std::string key, T PipelineConfig::*outer, double T::*member) {
  return {key, [=](const PipelineConfig& c) { return format_double(c.*outer.*member); },
          [=](PipelineConfig& c, const std::string& v) { c.*outer.*member = parse_real(key, v); }};
}

template <typename T>
Field int_field(std::string key, T PipelineConfig::*outer, int T::*member) {
  return {key, [=](const PipelineConfig& c) { return std::to_string(c.*outer.*member); },
          [=](PipelineConfig& c, const std::string& v) { c.*outer.*member = parse_int(key, v); }};
}

// Stage training fields shared by the three trainable models.
template <typename T>
void training_fields(std::vector<Field>& out, const std::string& prefix, T PipelineConfig::*outer) {
  out.push_back(real_field(prefix + "dropout", outer, &T::dropout));
  out.push_back(size_field(prefix + "epochs", outer, &T::epochs));
  out.push_back(size_field(prefix + "batch_size", outer, &T::batch_size));
  out.push_back(real_field(prefix + "lr", outer, &T::learning_rate));
  out.push_back(real_field(prefix + "clip", outer, &T::clip_norm));
  out.push_back(int_field(prefix + "patience", outer, &T::patience));
  out.push_back(real_field(prefix + "decay", outer, &T::decay_factor));
  out.push_back(real_field(prefix + "lr_floor", outer, &T::lr_floor));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back({"dataset", [](const PipelineConfig& c) { return c.dataset.string(); },
                 [](PipelineConfig& c, const std::string& v) { c.dataset = v; }});
    f.push_back({"dataset_format", [](const PipelineConfig& c) { return c.dataset_format; },
                 [](PipelineConfig& c, const std::string& v) {
                   if (v != "auto" && !parse_dataset_format(v)) throw Error("config: unknown dataset_format '" + v + "'");
                   c.dataset_format = v;
                 }});
    f.push_back({"work_dir", [](const PipelineConfig& c) { return c.work_dir.string(); },
                 [](PipelineConfig& c, const std::string& v) { c.work_dir = v; }});
    f.push_back({"seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
                 [](PipelineConfig& c, const std::string& v) {
                   c.seed = parse_size("seed", v);
                   c.lm.seed = c.seed;
                   c.ner.seed = c.seed + 1;
                   c.summarizer.seed = c.seed + 2;
                 }});
    f.push_back(size_field("max_code_len", &PipelineConfig::preprocess, &PreprocessOptions::max_code_len));
    f.push_back(size_field("max_comment_len", &PipelineConfig::preprocess, &PreprocessOptions::max_comment_len));
    f.push_back({"min_count", [](const PipelineConfig& c) { return std::to_string(c.min_count); },
                 [](PipelineConfig& c, const std::string& v) { c.min_count = parse_size("min_count", v); }});
    f.push_back(real_field("split_train", &PipelineConfig::split, &SplitSpec::train_fraction));
    f.push_back(real_field("split_valid", &PipelineConfig::split, &SplitSpec::valid_fraction));
    f.push_back(real_field("split_test", &PipelineConfig::split, &SplitSpec::test_fraction));
    f.push_back({"split_seed", [](const PipelineConfig& c) { return std::to_string(c.split.seed); },
                 [](PipelineConfig& c, const std::string& v) { c.split.seed = parse_size("split_seed", v); }});
    f.push_back({"occurrence_cap", [](const PipelineConfig& c) { return std::to_string(c.occurrence_cap); },
                 [](PipelineConfig& c, const std::string& v) { c.occurrence_cap = parse_size("occurrence_cap", v); }});

    f.push_back(size_field("lm_char_dim", &PipelineConfig::lm, &CharLmConfig::char_dim));
    f.push_back(size_field("lm_hidden", &PipelineConfig::lm, &CharLmConfig::hidden));
    f.push_back(size_field("lm_bptt", &PipelineConfig::lm, &CharLmConfig::bptt));
    training_fields(f, "lm_", &PipelineConfig::lm);
    f.push_back({"lm_anchor", [](const PipelineConfig& c) { return anchor_name(c.lm.anchor); },
                 [](PipelineConfig& c, const std::string& v) {
                   if (v == "at-first-char") {
                     c.lm.anchor = BackwardAnchor::kAtFirstChar;
                   } else if (v == "before-first-char") {
                     c.lm.anchor = BackwardAnchor::kBeforeFirstChar;
                   } else {
                     throw Error("config: lm_anchor expects at-first-char or before-first-char");
                   }
                 }});

    f.push_back(size_field("ner_proj", &PipelineConfig::ner, &NerConfig::proj));
    f.push_back(size_field("ner_hidden", &PipelineConfig::ner, &NerConfig::hidden));
    training_fields(f, "ner_", &PipelineConfig::ner);
    f.push_back({"ner_fine_tune_embeddings",
                 [](const PipelineConfig& c) { return std::string(c.ner.fine_tune_embeddings ? "true" : "false"); },
                 [](PipelineConfig& c, const std::string& v) {
                   c.ner.fine_tune_embeddings = parse_bool("ner_fine_tune_embeddings", v);
                 }});

    f.push_back({"summ_mode", [](const PipelineConfig& c) { return std::string(mode_name(c.summarizer.mode)); },
                 [](PipelineConfig& c, const std::string& v) { c.summarizer.mode = parse_mode(v); }});
    f.push_back(size_field("summ_code_dim", &PipelineConfig::summarizer, &SummarizerConfig::code_dim));
    f.push_back(size_field("summ_enc_hidden", &PipelineConfig::summarizer, &SummarizerConfig::enc_hidden));
    f.push_back(size_field("summ_dec_hidden", &PipelineConfig::summarizer, &SummarizerConfig::dec_hidden));
    f.push_back(size_field("summ_comment_dim", &PipelineConfig::summarizer, &SummarizerConfig::comment_dim));
    f.push_back(size_field("summ_attention_dim", &PipelineConfig::summarizer, &SummarizerConfig::attention_dim));
    training_fields(f, "summ_", &PipelineConfig::summarizer);
    f.push_back(size_field("summ_max_len", &PipelineConfig::summarizer, &SummarizerConfig::max_len));
    f.push_back(size_field("summ_beam_width", &PipelineConfig::summarizer, &SummarizerConfig::beam_width));
    f.push_back({"external_code_table", [](const PipelineConfig& c) { return c.external_code_table.string(); },
                 [](PipelineConfig& c, const std::string& v) { c.external_code_table = v; }});
    f.push_back({"attention_exports", [](const PipelineConfig& c) { return std::to_string(c.attention_exports); },
                 [](PipelineConfig& c, const std::string& v) {
                   c.attention_exports = parse_size("attention_exports", v);
                 }});

    f.push_back(real_field("metric_bleu_epsilon", &PipelineConfig::metrics, &MetricOptions::bleu_epsilon));
    f.push_back(real_field("metric_meteor_alpha", &PipelineConfig::metrics, &MetricOptions::meteor_alpha));
    f.push_back(real_field("metric_meteor_beta", &PipelineConfig::metrics, &MetricOptions::meteor_beta));
    f.push_back(real_field("metric_meteor_gamma", &PipelineConfig::metrics, &MetricOptions::meteor_gamma));
    f.push_back(size_field("metric_meteor_node_limit", &PipelineConfig::metrics, &MetricOptions::meteor_node_limit));
    f.push_back(real_field("metric_cider_sigma", &PipelineConfig::metrics, &MetricOptions::cider_sigma));
    f.push_back({"metric_cider_scaled",
                 [](const PipelineConfig& c) { return std::string(c.metrics.cider_scaled ? "true" : "false"); },
                 [](PipelineConfig& c, const std::string& v) {
                   c.metrics.cider_scaled = parse_bool("metric_cider_scaled", v);
                 }});
    f.push_back({"verbose", [](const PipelineConfig& c) { return std::string(c.lm.verbose ? "true" : "false"); },
                 [](PipelineConfig& c, const std::string& v) {
                   const bool b = parse_bool("verbose", v);
                   c.lm.verbose = c.ner.verbose = c.summarizer.verbose = b;
                 }});
    std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return f;
  }();
  return all;
}

void parse_into(PipelineConfig& config, std::string_view text, const fs::path& base_dir, int depth) {
  if (depth > 16) throw Error("config: include nesting too deep");
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    const bool is_path = key == "dataset" || key == "work_dir" || key == "external_code_table";
    if (is_path && !value.empty() && fs::path(value).is_relative()) {
      value = (base_dir / value).lexically_normal().string();
    }
    if (key == "include") {
      if (auto preset = preset_text(value)) {
        parse_into(config, *preset, base_dir, depth + 1);
      } else {
        const fs::path path = fs::path(value).is_absolute() ? fs::path(value) : base_dir / value;
        if (!fs::exists(path)) throw Error("config: include '" + value + "' is neither a preset nor a file");
        parse_into(config, read_file(path), path.parent_path(), depth + 1);
      }
      continue;
    }
    try {
      config.set(key, value);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

Tokens split_ws(const std::string& s) {
  std::istringstream in(s);
  Tokens out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Split files hold already preprocessed, space-joined tokens.
std::vector<ParallelPair> read_split(const fs::path& path) {
  std::vector<ParallelPair> out;
  std::istringstream in(read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DatasetError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    out.push_back({j.value("id", std::to_string(out.size())), split_ws(j.at("code").get<std::string>()),
                   split_ws(j.at("comment").get<std::string>())});
  }
  return out;
}

std::vector<std::vector<std::string>> code_corpus(const std::vector<ParallelPair>& pairs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.code_tokens);
  return out;
}

std::string file_safe(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "_" : out;
}

struct Stage {
  std::string name;
  std::vector<std::string> config_keys;  // key prefixes folded into the fingerprint
  std::vector<std::string> inputs;       // relative to work_dir
  std::vector<std::string> outputs;
  std::function<void(const PipelineConfig&, const fs::path&)> run;
};

std::string stage_fingerprint(const PipelineConfig& config, const Stage& stage) {
  std::string text;
  for (const auto& f : fields()) {
    for (const auto& prefix : stage.config_keys) {
      if (f.key.rfind(prefix, 0) == 0) {
        text += f.key + "=" + f.get(config) + "\n";
        break;
      }
    }
  }
  if (stage.name == "prepare") text += "dataset-bytes=" + file_checksum(config.dataset) + "\n";
  if (stage.name == "train-summarizer" && !config.external_code_table.empty()) {
    text += "external-table-bytes=" + file_checksum(config.external_code_table) + "\n";
  }
  return checksum_hex(fnv1a(text));
}

void run_prepare(const PipelineConfig& config, const fs::path& w) {
  if (config.dataset.empty()) throw Error("no dataset configured");
  const DatasetFormat format = config.dataset_format == "auto" ? guess_dataset_format(config.dataset)
                                                                : *parse_dataset_format(config.dataset_format);
  const auto raw = load_raw_dataset(config.dataset, format);
  std::map<std::string, const RawRecord*> by_id;
  std::vector<ParallelPair> pairs;
  for (const auto& r : raw) {
    if (!by_id.emplace(r.id, &r).second) throw DatasetError("duplicate id '" + r.id + "'", r.line);
    pairs.push_back(preprocess(to_pair(r), config.preprocess));
  }
  const Splits splits = split(pairs, config.split);
  write_pairs_jsonl(w / "corpus/train.jsonl", splits.train);
  write_pairs_jsonl(w / "corpus/valid.jsonl", splits.valid);
  write_pairs_jsonl(w / "corpus/test.jsonl", splits.test);
  build_vocab(splits.train, Side::kCode, config.min_count).save(w / "corpus/code.vocab");
  build_vocab(splits.train, Side::kComment, config.min_count).save(w / "corpus/comment.vocab");
  auto label_split = [&](const std::vector<ParallelPair>& part, const char* name) {
    std::vector<std::string> sources;
    for (const auto& p : part) sources.push_back(by_id.at(p.id)->code);
    write_text(w / "ner" / name, to_conll(label_methods(sources, config.preprocess.max_code_len)));
  };
  label_split(splits.train, "train.conll");
  label_split(splits.valid, "valid.conll");
  label_split(splits.test, "test.conll");
}

std::vector<std::string> lm_lines(const std::vector<ParallelPair>& pairs) {
  std::vector<std::string> lines;
  for (const auto& p : pairs) lines.push_back(code_line(p.code_tokens));
  return lines;
}

void run_train_lm(const PipelineConfig& config, const fs::path& w) {
  const auto train = lm_lines(read_split(w / "corpus/train.jsonl"));
  const auto valid = lm_lines(read_split(w / "corpus/valid.jsonl"));
  const CharLm lm = train_char_lm(train, config.lm, nullptr, valid.empty() ? nullptr : &valid);
  lm.to_checkpoint().save(w / "models/charlm.ckpt");
}

void run_extract_semantic(const PipelineConfig& config, const fs::path& w) {
  const CharLm lm = CharLm::from_checkpoint(Checkpoint::load(w / "models/charlm.ckpt"));
  const auto train = read_split(w / "corpus/train.jsonl");
  const Vocabulary vocab = Vocabulary::load(w / "corpus/code.vocab");
  build_semantic_table(lm, code_corpus(train), vocab, config.seed + 3, config.occurrence_cap)
      .save(w / "tables/semantic.vec");
}

void run_train_ner(const PipelineConfig& config, const fs::path& w) {
  const auto semantic = EmbeddingTable::load(w / "tables/semantic.vec");
  const auto train = read_conll(w / "ner/train.conll");
  const auto valid = read_conll(w / "ner/valid.conll");
  const NerModel model = train_ner(train, semantic, config.ner, nullptr, valid.empty() ? nullptr : &valid);
  model.to_checkpoint().save(w / "models/ner.ckpt");
  write_text(w / "outputs/ner_eval.json", evaluate_ner(model, read_conll(w / "ner/test.conll")).to_json());
}

void run_extract_syntactic(const PipelineConfig& config, const fs::path& w) {
  const NerModel model = NerModel::from_checkpoint(Checkpoint::load(w / "models/ner.ckpt"));
  const auto train = read_split(w / "corpus/train.jsonl");
  const Vocabulary vocab = Vocabulary::load(w / "corpus/code.vocab");
  build_syntactic_table(model, code_corpus(train), vocab, config.seed + 4, config.occurrence_cap)
      .save(w / "tables/syntactic.vec");
}

void run_concat(const PipelineConfig&, const fs::path& w) {
  concat_tables(EmbeddingTable::load(w / "tables/semantic.vec"), EmbeddingTable::load(w / "tables/syntactic.vec"))
      .save(w / "tables/semantic_syntax.vec");
}

void run_train_summarizer(const PipelineConfig& config, const fs::path& w) {
  EmbeddingTable table;
  if (!config.external_code_table.empty()) {
    table = EmbeddingTable::load(config.external_code_table);
  } else {
    switch (config.summarizer.mode) {
      case SummarizerMode::kLamner:
      case SummarizerMode::kStatic:
        table = EmbeddingTable::load(w / "tables/semantic_syntax.vec");
        break;
      case SummarizerMode::kLam:
        table = EmbeddingTable::load(w / "tables/semantic.vec");
        break;
      case SummarizerMode::kNer:
        table = EmbeddingTable::load(w / "tables/syntactic.vec");
        break;
    }
  }
  const auto train = read_split(w / "corpus/train.jsonl");
  const auto valid = read_split(w / "corpus/valid.jsonl");
  const SummarizerModel model =
      train_summarizer(train, Vocabulary::load(w / "corpus/code.vocab"), Vocabulary::load(w / "corpus/comment.vocab"),
                       table, config.summarizer, nullptr, valid.empty() ? nullptr : &valid);
  model.to_checkpoint().save(w / "models/summarizer.ckpt");
}

void run_generate(const PipelineConfig& config, const fs::path& w) {
  const SummarizerModel model = SummarizerModel::from_checkpoint(Checkpoint::load(w / "models/summarizer.ckpt"));
  const auto test = read_split(w / "corpus/test.jsonl");
  std::vector<std::string> ids, predictions;
  fs::remove_all(w / "outputs/attention");
  fs::create_directories(w / "outputs/attention");
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Generation g = model.generate(test[i].code_tokens, config.summarizer.max_len, config.summarizer.beam_width);
    ids.push_back(test[i].id);
    predictions.push_back(code_line(g.tokens));
    if (i < config.attention_exports) {
      export_attention(g.attention, test[i].code_tokens, g.tokens,
                       w / "outputs/attention" / (file_safe(test[i].id) + ".txt"));
    }
  }
  write_predictions(w / "outputs/predictions.jsonl", ids, predictions);
}

void run_evaluate(const PipelineConfig& config, const fs::path& w) {
  const auto pairs = align_predictions(read_predictions(w / "outputs/predictions.jsonl"),
                                       read_split(w / "corpus/test.jsonl"));
  const MetricReport r = report(pairs, config.metrics);
  write_text(w / "outputs/report.json", r.to_json());
  write_text(w / "outputs/report.txt", r.to_table());
}

const std::vector<Stage>& stages() {
  static const std::vector<Stage> all = {
      {"prepare",
       {"dataset_format", "max_code_len", "max_comment_len", "min_count", "split_"},
       {},
       {"corpus/train.jsonl", "corpus/valid.jsonl", "corpus/test.jsonl", "corpus/code.vocab", "corpus/comment.vocab",
        "ner/train.conll", "ner/valid.conll", "ner/test.conll"},
       run_prepare},
      {"train-lm", {"lm_", "seed"}, {"corpus/train.jsonl", "corpus/valid.jsonl"}, {"models/charlm.ckpt"}, run_train_lm},
      {"extract-semantic",
       {"occurrence_cap", "seed"},
       {"models/charlm.ckpt", "corpus/train.jsonl", "corpus/code.vocab"},
       {"tables/semantic.vec"},
       run_extract_semantic},
      {"train-ner",
       {"ner_", "seed"},
       {"tables/semantic.vec", "ner/train.conll", "ner/valid.conll", "ner/test.conll"},
       {"models/ner.ckpt", "outputs/ner_eval.json"},
       run_train_ner},
      {"extract-syntactic",
       {"occurrence_cap", "seed"},
       {"models/ner.ckpt", "corpus/train.jsonl", "corpus/code.vocab"},
       {"tables/syntactic.vec"},
       run_extract_syntactic},
      {"concat-tables", {}, {"tables/semantic.vec", "tables/syntactic.vec"}, {"tables/semantic_syntax.vec"}, run_concat},
      {"train-summarizer",
       {"summ_mode", "summ_code_dim", "summ_enc_hidden", "summ_dec_hidden", "summ_comment_dim", "summ_attention_dim",
        "summ_dropout", "summ_epochs", "summ_batch_size", "summ_lr", "summ_clip", "summ_patience", "summ_decay",
        "external_code_table", "seed"},
       {"corpus/train.jsonl", "corpus/valid.jsonl", "corpus/code.vocab", "corpus/comment.vocab", "tables/semantic.vec",
        "tables/syntactic.vec", "tables/semantic_syntax.vec"},
       {"models/summarizer.ckpt"},
       run_train_summarizer},
      {"generate",
       {"summ_max_len", "summ_beam_width", "attention_exports"},
       {"models/summarizer.ckpt", "corpus/test.jsonl"},
       {"outputs/predictions.jsonl"},
       run_generate},
      {"evaluate",
       {"metric_"},
       {"outputs/predictions.jsonl", "corpus/test.jsonl"},
       {"outputs/report.json", "outputs/report.txt"},
       run_evaluate},
  };
  return all;
}

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fs", s);
  return buf;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.put(*this, value);
      return;
    }
  }
  throw Error("config: unknown key '" + key + "'");
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::uint64_t PipelineConfig::fingerprint() const { return fnv1a(to_text()); }

std::vector<std::string> preset_names() { return {"paper-defaults", "desk-scale"}; }

std::optional<std::string> preset_text(std::string_view name) {
  if (name == "paper-defaults") return std::string(embedded::kPresetPaperDefaults);
  if (name == "desk-scale") return std::string(embedded::kPresetDeskScale);
  return std::nullopt;
}

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
  PipelineConfig config;
  parse_into(config, text, base_dir, 0);
  return config;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error("config file not found: " + path.string());
  PipelineConfig config = parse_config(read_file(path), path.parent_path().empty() ? "." : path.parent_path());
  return config;
}

std::optional<fs::path> resolve_config_path(const std::optional<fs::path>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return explicit_path;
  if (const char* env = std::getenv("LAMNER_CONFIG"); env && *env) return fs::path(env);
  return std::nullopt;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checksum_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string file_checksum(const fs::path& path) { return checksum_hex(fnv1a(read_file(path))); }

const StageRecord* RunManifest::find(const std::string& stage) const {
  for (const auto& s : stages) {
    if (s.name == stage) return &s;
  }
  return nullptr;
}

std::string RunManifest::to_json() const {
  json j;
  j["tool_version"] = tool_version;
  j["config"] = config;
  j["stages"] = json::array();
  for (const auto& s : stages) {
    j["stages"].push_back({{"name", s.name},
                           {"config_fingerprint", s.config_fingerprint},
                           {"inputs", s.inputs},
                           {"outputs", s.outputs},
                           {"seconds", s.seconds},
                           {"skipped", s.skipped}});
  }
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.config = j.at("config").get<std::string>();
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.name = s.at("name").get<std::string>();
    r.config_fingerprint = s.at("config_fingerprint").get<std::string>();
    r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
    r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
    r.seconds = s.at("seconds").get<double>();
    r.skipped = s.at("skipped").get<bool>();
    m.stages.push_back(std::move(r));
  }
  return m;
}

void RunManifest::save(const fs::path& path) const { write_text(path, to_json()); }

std::optional<RunManifest> RunManifest::load(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return from_json(read_file(path));
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable manifest: treat every stage as stale
  }
}

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : stages()) n.push_back(s.name);
    return n;
  }();
  return names;
}

RunManifest run_pipeline(const PipelineConfig& config, const PipelineOptions& options) {
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const fs::path w = config.work_dir;
  fs::create_directories(w);
  const fs::path manifest_path = w / "manifest.json";
  const auto previous = options.force ? std::nullopt : RunManifest::load(manifest_path);

  RunManifest manifest;
  manifest.config = config.to_text();
  for (const Stage& stage : stages()) {
    StageRecord record;
    record.name = stage.name;
    try {
      record.config_fingerprint = stage_fingerprint(config, stage);
      for (const auto& in : stage.inputs) {
        if (!fs::exists(w / in)) throw Error("missing input " + in);
        record.inputs[in] = file_checksum(w / in);
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage.name, e.what());
    }

    bool fresh = previous.has_value();
    if (fresh) {
      const StageRecord* old = previous->find(stage.name);
      fresh = old && old->config_fingerprint == record.config_fingerprint && old->inputs == record.inputs;
      if (fresh) {
        for (const auto& [out, sum] : old->outputs) {
          if (!fs::exists(w / out) || file_checksum(w / out) != sum) {
            log(stage.name + ": output " + out + " changed since last run");
            fresh = false;
            break;
          }
        }
      }
      if (fresh) record.outputs = old->outputs;
    }

    if (fresh) {
      record.skipped = true;
      log(stage.name + ": up to date");
    } else {
      log(stage.name + ": running");
      const auto start = std::chrono::steady_clock::now();
      try {
        stage.run(config, w);
        for (const auto& out : stage.outputs) {
          if (!fs::exists(w / out)) throw Error("stage did not produce " + out);
          record.outputs[out] = file_checksum(w / out);
        }
      } catch (const std::exception& e) {
        manifest.save(manifest_path);
        throw StageError(stage.name, e.what());
      }
      record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log(stage.name + ": done in " + format_seconds(record.seconds));
    }
    manifest.stages.push_back(std::move(record));
    manifest.save(manifest_path);
  }
  return manifest;
}

std::vector<LabeledSequence> label_methods(const std::vector<std::string>& sources, std::size_t max_len) {
  std::vector<TokenizedMethod> methods;
  ClassIndex index;
  for (const auto& src : sources) {
    try {
      methods.push_back(tokenize(src));
      index.add(methods.back());
    } catch (const LexError&) {
    }
  }
  std::vector<LabeledSequence> out;
  for (auto& m : methods) {
    if (m.tokens.empty()) continue;
    LabeledSequence seq = labeled_sequence(label(std::move(m), &index));
    if (seq.tokens.size() > max_len) {
      seq.tokens.resize(max_len);
      seq.labels.resize(max_len);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void write_predictions(const fs::path& path, const std::vector<std::string>& ids,
                       const std::vector<std::string>& predictions) {
  if (ids.size() != predictions.size()) throw Error("write_predictions: id and prediction counts differ");
  std::string text;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    text += json{{"id", ids[i]}, {"prediction", predictions[i]}}.dump();
    text += '\n';
  }
  write_text(path, text);
}

std::map<std::string, std::string> read_predictions(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DatasetError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    const char* field = j.contains("prediction") ? "prediction" : "comment";
    if (!j.contains(field) || !j[field].is_string()) throw DatasetError("missing field 'prediction'", line_no);
    const std::string id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                            : std::to_string(out.size());
    if (!out.emplace(id, j[field].get<std::string>()).second) {
      throw DatasetError("duplicate prediction id '" + id + "'", line_no);
    }
  }
  return out;
}

std::vector<ParallelPair> read_references(const fs::path& path) {
  std::vector<ParallelPair> out;
  std::istringstream in(read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DatasetError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.contains("comment") || !j["comment"].is_string()) throw DatasetError("missing field 'comment'", line_no);
    ParallelPair p;
    p.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                            : std::to_string(out.size());
    p.comment_tokens = tokenize_comment(j["comment"].get<std::string>());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<EvalPair> align_predictions(const std::map<std::string, std::string>& predictions,
                                        const std::vector<ParallelPair>& references) {
  std::vector<EvalPair> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& ref : references) {
    auto it = slot.find(ref.id);
    if (it == slot.end()) {
      auto pred = predictions.find(ref.id);
      if (pred == predictions.end()) throw Error("no prediction for reference id '" + ref.id + "'");
      it = slot.emplace(ref.id, out.size()).first;
      out.push_back({tokenize_comment(pred->second), {}});
    }
    out[it->second].references.push_back(ref.comment_tokens);
  }
  return out;
}

std::vector<SuiteResult> self_test(const SelfTestOptions& options) {
  std::vector<SuiteResult> suites;

  SuiteResult grad;
  grad.name = "gradients";
  for (const auto& c : gradient_cases()) {
    for (std::uint64_t seed = 1; seed <= options.gradient_seeds; ++seed) {
      ++grad.checks;
      const double err = c.run(seed);
      if (!(err < c.tolerance)) {
        ++grad.failures;
        grad.messages.push_back(c.name + " seed " + std::to_string(seed) + ": relative error " + std::to_string(err));
      }
    }
  }
  suites.push_back(grad);

  SuiteResult crf;
  crf.name = "crf-enumeration";
  const auto oracle = crf_oracle_check(100, 7);
  crf.checks = 2 * oracle.instances;
  if (!(oracle.max_log_partition_error < 1e-8)) {
    ++crf.failures;
    crf.messages.push_back("log partition error " + std::to_string(oracle.max_log_partition_error));
  }
  crf.failures += oracle.viterbi_failures;
  if (oracle.viterbi_failures) crf.messages.push_back(std::to_string(oracle.viterbi_failures) + " viterbi mismatches");
  suites.push_back(crf);

  SuiteResult metric;
  metric.name = "metric-goldens";
  try {
    metric.messages = check_metric_golden(embedded::kMetricGolden, embedded::kMetricGoldenReport, options.metrics,
                                          &metric.checks);
    metric.failures = metric.messages.size();
  } catch (const std::exception& e) {
    ++metric.failures;
    metric.messages.push_back(e.what());
  }
  suites.push_back(metric);

  SuiteResult lexer;
  lexer.name = "lexer-golden";
  try {
    const auto cases = parse_lexer_golden(embedded::kLexerGolden);
    for (const auto& c : cases) lexer.checks += c.expected.size();
    lexer.messages = check_lexer_golden(cases);
    lexer.failures = lexer.messages.size();
  } catch (const std::exception& e) {
    ++lexer.failures;
    lexer.messages.push_back(e.what());
  }
  suites.push_back(lexer);
  return suites;
}

std::string format_self_test(const std::vector<SuiteResult>& suites) {
  std::string out;
  bool all = true;
  for (const auto& s : suites) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %s  %zu checks, %zu failures\n", s.name.c_str(),
                  s.passed() ? "PASS" : "FAIL", s.checks, s.failures);
    out += buf;
    for (std::size_t i = 0; i < s.messages.size() && i < 10; ++i) out += "    " + s.messages[i] + "\n";
    all = all && s.passed();
  }
  out += all ? "self-test: all suites passed\n" : "self-test: FAILED\n";
  return out;
}

}  // namespace lamner
