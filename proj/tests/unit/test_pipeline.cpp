#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lamner/checkpoint.hpp"
#include "lamner/error.hpp"
#include "lamner/pipeline.hpp"
#include "lamner/synth.hpp"

using namespace lamner;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lamner_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Micro widths so a whole run takes about a second.
PipelineConfig tiny_config(const fs::path& dir) {
  write_synth_jsonl(dir / "data.jsonl", synthesize_methods(40, 77));
  auto c = parse_config(
      "min_count = 1\n"
      "lm_char_dim = 4\nlm_hidden = 6\nlm_epochs = 2\nlm_batch_size = 8\n"
      "ner_proj = 6\nner_hidden = 6\nner_epochs = 2\nner_batch_size = 8\n"
      "summ_enc_hidden = 6\nsumm_dec_hidden = 8\nsumm_comment_dim = 6\nsumm_attention_dim = 6\n"
      "summ_epochs = 2\nsumm_batch_size = 8\nattention_exports = 3\n"
      "dataset = data.jsonl\nwork_dir = run\n",
      dir);
  return c;
}

std::vector<std::string> ran_stages(const RunManifest& m) {
  std::vector<std::string> out;
  for (const auto& s : m.stages) {
    if (!s.skipped) out.push_back(s.name);
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing, includes and relative paths") {
  auto c = parse_config("# comment\ninclude = desk-scale\nseed = 7  # trailing\nwork_dir = out\n", "/base");
  CHECK(c.seed == 7);
  CHECK(c.min_count == 1);
  CHECK(c.lm.hidden == 64);
  CHECK(c.work_dir == fs::path("/base/out"));
  CHECK(parse_config("work_dir = /abs\n", "/base").work_dir == fs::path("/abs"));
  CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), Error);
  CHECK_THROWS_AS(parse_config("seed = many\n"), Error);
  CHECK_THROWS_AS(parse_config("summ_mode = sideways\n"), Error);
  CHECK_THROWS_AS(parse_config("just text\n"), Error);

  auto dir = fresh_dir("include");
  std::ofstream(dir / "base.conf") << "seed = 11\nlm_hidden = 5\n";
  std::ofstream(dir / "top.conf") << "include = base.conf\nlm_hidden = 9\n";
  auto inc = load_config(dir / "top.conf");
  CHECK(inc.seed == 11);
  CHECK(inc.lm.hidden == 9);
  CHECK_THROWS_AS(load_config(dir / "missing.conf"), Error);
}

TEST_CASE("resolved config text round trips") {
  auto c = parse_config("include = desk-scale\nseed = 5\nsumm_mode = lam\nmetric_meteor_gamma = 0.25\n");
  auto again = parse_config(c.to_text());
  CHECK(again.to_text() == c.to_text());
  CHECK(again.fingerprint() == c.fingerprint());
  c.set("summ_lr", "0.3");
  CHECK(c.fingerprint() != again.fingerprint());
}

TEST_CASE("paper-defaults preset carries the published settings") {
  CHECK(preset_names() == std::vector<std::string>{"paper-defaults", "desk-scale"});
  auto text = preset_text("paper-defaults");
  REQUIRE(text.has_value());
  auto c = parse_config(*text);
  CHECK(c.preprocess.max_code_len == 300);
  CHECK(c.preprocess.max_comment_len == 30);
  CHECK(c.split.train_fraction == 0.8);
  CHECK(c.split.valid_fraction == 0.1);
  CHECK(c.split.test_fraction == 0.1);
  for (double dropout : {c.lm.dropout, c.ner.dropout, c.summarizer.dropout}) CHECK(dropout == 0.1);
  CHECK(c.summarizer.learning_rate == 0.1);
  CHECK(c.summarizer.batch_size == 16);
  CHECK(c.summarizer.epochs == 100);
  CHECK(c.summarizer.patience == 7);
  CHECK(c.summarizer.decay_factor == 0.1);
  CHECK(c.summarizer.lr_floor == 1e-7);
  CHECK(2 * c.summarizer.enc_hidden == 512);
  CHECK(c.summarizer.dec_hidden == 512);
  CHECK(c.summarizer.max_len == 30);
  CHECK(2 * c.lm.hidden + 2 * c.ner.hidden == 512);
  CHECK_FALSE(preset_text("nope").has_value());
}

TEST_CASE("config path falls back to the environment") {
  CHECK(resolve_config_path(fs::path("given.conf")) == fs::path("given.conf"));
  ::setenv("LAMNER_CONFIG", "/tmp/from-env.conf", 1);
  CHECK(resolve_config_path(std::nullopt) == fs::path("/tmp/from-env.conf"));
  ::unsetenv("LAMNER_CONFIG");
  CHECK_FALSE(resolve_config_path(std::nullopt).has_value());
}

TEST_CASE("checksums") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(checksum_hex(fnv1a("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("manifest json round trip") {
  RunManifest m;
  m.config = "seed = 1\n";
  m.stages.push_back({"prepare", "00ff", {{"a", "1"}}, {{"b", "2"}}, 0.5, false});
  auto back = RunManifest::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  REQUIRE(back.find("prepare") != nullptr);
  CHECK(back.find("prepare")->outputs.at("b") == "2");
  CHECK(back.find("evaluate") == nullptr);
  auto dir = fresh_dir("manifest");
  m.save(dir / "manifest.json");
  CHECK(RunManifest::load(dir / "manifest.json")->to_json() == m.to_json());
  CHECK_FALSE(RunManifest::load(dir / "absent.json").has_value());
}

TEST_CASE("pipeline caches stages and re-runs only what changed") {
  auto dir = fresh_dir("cache");
  auto config = tiny_config(dir);
  auto first = run_pipeline(config);
  CHECK(ran_stages(first) == pipeline_stages());
  const auto w = config.work_dir;
  for (const char* f : {"models/charlm.ckpt", "models/ner.ckpt", "models/summarizer.ckpt", "tables/semantic.vec",
                        "tables/syntactic.vec", "tables/semantic_syntax.vec", "outputs/predictions.jsonl",
                        "outputs/report.json", "outputs/ner_eval.json", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(w / f), f);
  }
  CHECK(std::distance(fs::directory_iterator(w / "outputs/attention"), fs::directory_iterator{}) == 3);

  auto second = run_pipeline(config);
  CHECK(ran_stages(second).empty());

  std::ofstream(w / "outputs/report.json", std::ios::app) << " ";
  CHECK(ran_stages(run_pipeline(config)) == std::vector<std::string>{"evaluate"});

  config.set("summ_max_len", "5");
  CHECK(ran_stages(run_pipeline(config)) == std::vector<std::string>{"generate", "evaluate"});

  CHECK(ran_stages(run_pipeline(config, {.force = true, .log = {}})) == pipeline_stages());
}

TEST_CASE("stage failures name the stage") {
  auto dir = fresh_dir("fail");
  auto config = tiny_config(dir);
  config.dataset = dir / "missing.jsonl";
  try {
    run_pipeline(config);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "prepare");
    CHECK(std::string(e.what()).rfind("prepare: ", 0) == 0);
  }

  config = tiny_config(dir);
  config.external_code_table = dir / "wrong.vec";
  std::ofstream(dir / "wrong.vec") << "1 3\nfoo\t1 2 3\n";
  config.summarizer.code_dim = 7;
  try {
    run_pipeline(config);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "train-summarizer");
  }
}

TEST_CASE("predictions align with references by id") {
  auto dir = fresh_dir("align");
  write_predictions(dir / "pred.jsonl", {"a", "b"}, {"returns the size .", "closes it ."});
  auto preds = read_predictions(dir / "pred.jsonl");
  CHECK(preds.at("b") == "closes it .");
  std::ofstream(dir / "ref.jsonl") << R"({"id":"a","comment":"Returns the size."})" "\n"
                                   << R"({"id":"a","comment":"Gets the size."})" "\n"
                                   << R"({"id":"b","comment":"Closes the stream."})" "\n";
  auto refs = read_references(dir / "ref.jsonl");
  auto pairs = align_predictions(preds, refs);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].references.size() == 2);
  CHECK(pairs[0].candidate == std::vector<std::string>{"returns", "the", "size", "."});
  std::ofstream(dir / "ref2.jsonl") << R"({"id":"zz","comment":"x"})" "\n";
  CHECK_THROWS_AS(align_predictions(preds, read_references(dir / "ref2.jsonl")), Error);
}

TEST_CASE("synthetic corpus is deterministic") {
  auto a = synthesize_methods(50, 3), b = synthesize_methods(50, 3), c = synthesize_methods(50, 4);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].code == b[i].code);
    CHECK(a[i].comment == b[i].comment);
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].code != c[i].code;
  CHECK(differs);
  CHECK(a[7].id == "m7");
}

TEST_CASE("self-test passes and catches an injected metric fault") {
  SelfTestOptions options;
  options.gradient_seeds = 1;
  for (const auto& s : self_test(options)) CHECK_MESSAGE(s.passed(), s.name);
  options.metrics.meteor_gamma = 0.6;
  for (const auto& s : self_test(options)) {
    if (s.name == "metric-goldens") CHECK_FALSE(s.passed());
    else CHECK(s.passed());
  }
}
