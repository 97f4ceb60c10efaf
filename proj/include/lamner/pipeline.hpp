#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lamner/char_lm.hpp"
#include "lamner/corpus.hpp"
#include "lamner/error.hpp"
#include "lamner/metrics.hpp"
#include "lamner/ner.hpp"
#include "lamner/summarizer.hpp"

namespace lamner {

inline constexpr std::string_view kToolVersion = "lamner 1.0.0";

/// Every setting of a pipeline run. Defaults are the full-scale values.
struct PipelineConfig {
  std::filesystem::path dataset;
  std::string dataset_format = "auto";  // auto | jsonl | tsv
  std::filesystem::path work_dir = "lamner-run";
  std::uint64_t seed = 1;  // stage seeds are derived from it

  PreprocessOptions preprocess;
  std::size_t min_count = 2;
  SplitSpec split;
  std::size_t occurrence_cap = 1000;

  CharLmConfig lm;
  NerConfig ner;
  SummarizerConfig summarizer;

  // Replaces the mode-derived code embedding table when set.
  std::filesystem::path external_code_table;
  std::size_t attention_exports = 20;  // attention files written by generate
  MetricOptions metrics;

  /// Applies one "key = value" setting; throws Error for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Resolved settings as sorted "key = value" lines (round-trips through parse).
  std::string to_text() const;
  std::uint64_t fingerprint() const;
};

/// Names of the built-in presets ("paper-defaults", "desk-scale").
std::vector<std::string> preset_names();
std::optional<std::string> preset_text(std::string_view name);

/// Flat "key = value" text with '#' comments. "include = NAME" pulls in a
/// built-in preset or, failing that, a file relative to `base_dir`. Later
/// settings override earlier ones. Relative dataset, work_dir and
/// external_code_table paths resolve against `base_dir`.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
PipelineConfig load_config(const std::filesystem::path& path);
/// Path given explicitly, else $LAMNER_CONFIG, else empty.
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& explicit_path);

std::uint64_t fnv1a(std::string_view bytes);
std::string checksum_hex(std::uint64_t value);
/// FNV-1a checksum of a file's bytes as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

struct StageRecord {
  std::string name;
  std::string config_fingerprint;
  std::map<std::string, std::string> inputs;   // path relative to work_dir -> checksum
  std::map<std::string, std::string> outputs;
  double seconds = 0.0;
  bool skipped = false;
};

struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string config;  // PipelineConfig::to_text()
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& stage) const;
  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;  // atomic
  static std::optional<RunManifest> load(const std::filesystem::path& path);
};

/// Raised when a stage fails; what() starts with the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what) : Error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Stage names in execution order.
const std::vector<std::string>& pipeline_stages();

struct PipelineOptions {
  bool force = false;  // re-run every stage
  std::function<void(const std::string&)> log;
};

/// Runs every stage, skipping those whose inputs, outputs and config are
/// unchanged since the last successful run recorded in work_dir/manifest.json.
RunManifest run_pipeline(const PipelineConfig& config, const PipelineOptions& options = {});

/// Lexes and labels methods for tagger training, using one class index built
/// over all of them. Methods that do not lex are skipped.
std::vector<LabeledSequence> label_methods(const std::vector<std::string>& sources,
                                           std::size_t max_len = kDefaultMaxCodeLen);

/// Generations as JSONL {"id", "prediction"}.
void write_predictions(const std::filesystem::path& path, const std::vector<std::string>& ids,
                       const std::vector<std::string>& predictions);
/// Reads {"id", "prediction"} (or "comment") records.
std::map<std::string, std::string> read_predictions(const std::filesystem::path& path);

/// Reference comments from JSONL {"id", "comment"} records (tokenized like
/// dataset comments). Repeated ids contribute several references.
std::vector<ParallelPair> read_references(const std::filesystem::path& path);

/// Pairs predictions with references by id; references may carry several
/// comments per id. Throws Error when a reference id has no prediction.
std::vector<EvalPair> align_predictions(const std::map<std::string, std::string>& predictions,
                                        const std::vector<ParallelPair>& references);

struct SuiteResult {
  std::string name;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::vector<std::string> messages;
  bool passed() const { return failures == 0 && checks > 0; }
};

struct SelfTestOptions {
  MetricOptions metrics;  // perturb to inject a fault into the metric suite
  std::size_t gradient_seeds = 3;
};

/// Gradient checks, CRF enumeration equivalence, metric goldens and the lexer
/// golden corpus (goldens are compiled into the library).
std::vector<SuiteResult> self_test(const SelfTestOptions& options = {});
std::string format_self_test(const std::vector<SuiteResult>& suites);

}  // namespace lamner
